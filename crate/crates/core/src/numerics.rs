//! Small scalar numerical routines: quadrature, ODE integration, bracketing.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Integrates the scalar autonomous-or-not ODE `y' = f(t, y)` with adaptive
/// Dormand–Prince 5(4) steps, reporting `y` at every point of `grid`.
pub fn solve_ode(
    f: &dyn Fn(f64, f64) -> f64,
    y0: f64,
    grid: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<f64>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("output grid must be non-decreasing"));
    }
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut out = Vec::with_capacity(grid.len());
    let Some(&t_first) = grid.first() else {
        return Ok(out);
    };
    let mut t = t_first;
    let mut y = y0;
    let mut h = if grid.len() > 1 {
        (grid[grid.len() - 1] - t_first) * 1e-3
    } else {
        1e-3
    }
    .max(1e-12);
    for &target in grid {
        while t < target {
            let step = h.min(target - t);
            let mut k = [0.0; 7];
            for s in 0..7 {
                let yi = y + step * (0..s).map(|r| A[s][r] * k[r]).sum::<f64>();
                k[s] = f(t + C[s] * step, yi);
            }
            let y5 = y + step * (0..7).map(|s| B5[s] * k[s]).sum::<f64>();
            let y4 = y + step * (0..7).map(|s| B4[s] * k[s]).sum::<f64>();
            if !y5.is_finite() {
                return Err(Error::numeric(format!("ODE solution diverged at t = {t}")));
            }
            let scale = atol + rtol * y.abs().max(y5.abs());
            let err = (y5 - y4).abs() / scale;
            if err <= 1.0 {
                t += step;
                y = y5;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = step * factor;
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::numeric(format!("ODE step size underflow at t = {t}")));
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Golden-section search for the maximiser of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_log() {
        let v = integrate(&|x| x * x, 0.0, 3.0, 1e-12);
        assert!((v - 9.0).abs() < 1e-10);
        let v = integrate(&|x| 1.0 / x, 1.0, 10.0, 1e-12);
        assert!((v - 10f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn ode_exponential_decay() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let y = solve_ode(&|_, y| -y, 1.0, &grid, 1e-10, 1e-12).unwrap();
        for (t, v) in grid.iter().zip(&y) {
            assert!((v - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let x = golden_max(&|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
