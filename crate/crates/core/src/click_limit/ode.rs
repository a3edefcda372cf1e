use serde::Serialize;

use super::and::g_and;
use crate::error::{Error, Result};
use crate::numerics::{integrate, solve_ode};

/// Solution of `dn/dτ = -g(n)` in rescaled time `τ = ΓNt`.
#[derive(Clone, Debug, Serialize)]
pub struct DensityTrajectory {
    pub rule: String,
    pub tau: Vec<f64>,
    pub n: Vec<f64>,
}

/// Integrates `dn/dτ = -g(n)` from `n0` over `tau_grid`.
pub fn ode_density(
    rule: &str,
    g: &dyn Fn(f64) -> f64,
    n0: f64,
    tau_grid: &[f64],
) -> Result<DensityTrajectory> {
    if !(0.0..=1.0).contains(&n0) {
        return Err(Error::invalid(format!("initial density {n0} outside [0, 1]")));
    }
    let n = solve_ode(&|_, n| -g(n), n0, tau_grid, 1e-10, 1e-13)?
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(DensityTrajectory {
        rule: rule.to_string(),
        tau: tau_grid.to_vec(),
        n,
    })
}

/// AND density trajectory.
pub fn ode_density_and(n0: f64, tau_grid: &[f64]) -> Result<DensityTrajectory> {
    ode_density("and", &g_and, n0, tau_grid)
}

/// Rescaled AND time `τ = ∫_{n_target}^{n0} dn / g(n)` to fall from `n0` to `n_target`.
///
/// With `g(n) = (1-n) h(n)` and `h(1) = 1` the integrand is split into the
/// analytic `1/(1-n)` part and a remainder that is smooth at `n = 1`.
pub fn quadrature_time(n_target: f64, n0: f64) -> Result<f64> {
    if !(n0 > 0.5 && n0 <= 1.0) {
        return Err(Error::invalid(format!("n0 = {n0} outside (1/2, 1]")));
    }
    if !(n_target > 0.5 && n_target <= n0) {
        return Err(Error::invalid(format!(
            "target {n_target} outside (1/2, {n0}]"
        )));
    }
    if n_target == n0 {
        return Ok(0.0);
    }
    if n0 == 1.0 {
        return Err(Error::invalid("the fully excited state is a fixed point of the rate equation"));
    }
    let h = |n: f64| (2.0 * n - 1.0).powi(2) / n;
    let smooth = |n: f64| {
        let d = 1.0 - n;
        if d < 1e-6 {
            // Series of (1/h(n) - 1)/(1 - n) about n = 1.
            3.0 + 8.0 * d
        } else {
            (1.0 / h(n) - 1.0) / d
        }
    };
    let singular = ((1.0 - n_target) / (1.0 - n0)).ln();
    Ok(singular + integrate(&smooth, n_target, n0, 1e-13))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn antiderivative(n: f64) -> f64 {
        let u = 2.0 * n - 1.0;
        -(1.0 - n).ln() + u.ln() - 0.5 / u
    }

    #[test]
    fn quadrature_matches_partial_fractions() {
        for (a, b) in [(0.6, 0.99), (0.8, 0.999999), (0.55, 0.7), (0.9, 1.0 - 1e-9)] {
            let t = quadrature_time(a, b).unwrap();
            let exact = antiderivative(b) - antiderivative(a);
            assert!((t - exact).abs() < 1e-9 * exact.abs().max(1.0), "{a} {b} {t} {exact}");
        }
    }

    #[test]
    fn zero_length_interval() {
        assert_eq!(quadrature_time(0.8, 0.8).unwrap(), 0.0);
        assert!(quadrature_time(0.4, 0.8).is_err());
        assert!(quadrature_time(0.9, 0.8).is_err());
    }

    #[test]
    fn ode_inverts_quadrature() {
        let n0 = 0.99;
        let t = quadrature_time(0.8, n0).unwrap();
        let traj = ode_density_and(n0, &[0.0, t]).unwrap();
        assert!((traj.n[1] - 0.8).abs() < 1e-8);
        assert!(traj.n.windows(2).all(|w| w[1] <= w[0]));
    }
}
