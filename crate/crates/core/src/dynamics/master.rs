use nalgebra::DMatrix;

use super::density::DensityMatrix;
use super::model::{EffectiveModel, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_sorted;
use crate::spin::{f_into, fdag_into, CompiledRule, Sector, C64};

/// Largest chain for the dense master-equation oracle.
pub const MASTER_MAX_SITES: usize = 8;

/// Dense Lindblad generator of the effective model.
pub struct Lindbladian<'a> {
    model: &'a EffectiveModel,
    compiled: CompiledRule,
    n: usize,
    /// Elementwise part: tail commutator, local anticommutators and dephasing.
    elementwise: DMatrix<C64>,
    /// Largest `|eigenvalue|` estimate, for step control.
    scale: f64,
}

fn apply_columns(m: &DMatrix<C64>, f: impl Fn(&[C64], &mut [C64])) -> DMatrix<C64> {
    let d = m.nrows();
    let mut out = DMatrix::from_element(d, m.ncols(), C64::new(0.0, 0.0));
    for c in 0..m.ncols() {
        let mut col = out.column_mut(c);
        f(m.column(c).as_slice(), col.as_mut_slice());
    }
    out
}

impl<'a> Lindbladian<'a> {
    pub fn new(model: &'a EffectiveModel, n: usize) -> Result<Self> {
        model.validate()?;
        if n == 0 || n > MASTER_MAX_SITES {
            return Err(Error::resource(format!(
                "master-equation oracle supports 1 <= N <= {MASTER_MAX_SITES}, got {n}"
            )));
        }
        let d = 1usize << n;
        let boundary = model.rule.boundary();
        let occ = |b: usize| (b as u64).count_ones() as f64;
        let sz = |b: usize| occ(b) - n as f64 / 2.0;
        let tail = |b: usize| {
            let starts = match boundary {
                crate::spin::Boundary::Periodic if n > 2 => n,
                crate::spin::Boundary::Periodic => 0,
                crate::spin::Boundary::Open => n.saturating_sub(2),
            };
            (0..starts)
                .filter(|&j| b >> j & 1 == 1 && b >> ((j + 2) % n) & 1 == 1)
                .count() as f64
        };
        let elementwise = DMatrix::from_fn(d, d, |a, b| {
            let zz = n as f64 - 2.0 * ((a ^ b) as u64).count_ones() as f64;
            let re = -0.5 * model.gamma_loss * (occ(a) + occ(b))
                + model.gamma_deph_ind * (zz - n as f64)
                - 0.5 * model.gamma_deph_common * (sz(a) - sz(b)).powi(2);
            let im = -model.v_nnn * (tail(a) - tail(b));
            C64::new(re, im)
        });
        let compiled = model.rule.compile(n);
        let lambda_max = Sector::all(n)
            .iter()
            .map(|s| {
                let f = s.f_matrix(&compiled);
                sym_eigen_sorted(f.transpose() * f).0.last().copied().unwrap_or(0.0)
            })
            .fold(0.0, f64::max);
        let scale = (model.gamma + model.chi.abs()) * lambda_max
            + model.gamma_loss * n as f64
            + 2.0 * model.gamma_deph_ind * n as f64
            + 0.5 * model.gamma_deph_common * (n * n) as f64
            + 2.0 * model.v_nnn.abs() * n as f64;
        Ok(Self {
            model,
            compiled,
            n,
            elementwise,
            scale,
        })
    }

    /// Spectral-radius estimate used for step selection.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `L(ρ)` for Hermitian `ρ`.
    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let m = self.model;
        let zero = C64::new(0.0, 0.0);
        let f_rho = apply_columns(rho, |v, o| f_into(&self.compiled, v, o));
        let mut out = rho.component_mul(&self.elementwise);
        if m.gamma != 0.0 || m.chi != 0.0 {
            let m_rho = apply_columns(&f_rho, |v, o| fdag_into(&self.compiled, v, o));
            let a = m_rho * C64::new(-0.5 * m.gamma, -m.chi);
            out += &a + a.adjoint();
        }
        if m.gamma != 0.0 {
            // F ρ F† = F (F ρ)†.
            let jump = apply_columns(&f_rho.adjoint(), |v, o| f_into(&self.compiled, v, o));
            out += jump * C64::new(m.gamma, 0.0);
        }
        if m.gamma_loss != 0.0 {
            let d = rho.nrows();
            for j in 0..self.n {
                let bit = 1usize << j;
                for b in (0..d).filter(|b| b & bit != 0) {
                    for a in (0..d).filter(|a| a & bit != 0) {
                        let v = rho[(a, b)];
                        if v != zero {
                            out[(a ^ bit, b ^ bit)] += v * m.gamma_loss;
                        }
                    }
                }
            }
        }
        out
    }

    fn rk4(&self, rho: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
        let hc = C64::new(h, 0.0);
        let half = C64::new(0.5 * h, 0.0);
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + &k1 * half));
        let k3 = self.apply(&(rho + &k2 * half));
        let k4 = self.apply(&(rho + &k3 * hc));
        let next = rho + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
        (&next + next.adjoint()) * C64::new(0.5, 0.0)
    }
}

/// Dense RK4 integration of the Lindblad equation, sampled on `grid`.
///
/// The step is `dt` if given, otherwise `0.05 / scale` with `scale` the
/// spectral-radius estimate of the generator.
pub fn evolve_master_exact(
    model: &EffectiveModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    dt: Option<f64>,
) -> Result<Vec<DensityMatrix>> {
    let n = rho0.n_sites();
    let l = Lindbladian::new(model, n)?;
    let dt_max = match dt {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => return Err(Error::invalid(format!("dt must be positive, got {dt}"))),
        None if l.scale() > 0.0 => 0.05 / l.scale(),
        None => grid.step(),
    };
    let mut rho = rho0.entries().clone();
    let mut out = vec![rho0.clone()];
    for i in 1..grid.n_points {
        let span = grid.time(i) - grid.time(i - 1);
        let steps = (span / dt_max).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            rho = l.rk4(&rho, h);
        }
        let tr = rho.trace();
        if !tr.re.is_finite() || (tr.re - 1.0).abs() > 1e-9 * (grid.time(i) - grid.t_start).max(1.0) {
            return Err(Error::numeric(format!("trace drifted to {tr} at t = {}", grid.time(i))));
        }
        out.push(DensityMatrix::new_unchecked(n, rho.clone())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{Boundary, ConstraintRule, Observable, PureState};

    #[test]
    fn frozen_without_rates() {
        let model = EffectiveModel::new(ConstraintRule::east(Boundary::Periodic), 0.0);
        let psi = PureState::from_terms(&[("110", 1.0), ("011", 0.5)]).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi).unwrap();
        let g = TimeGrid::new(0.0, 2.0, 3).unwrap();
        let out = evolve_master_exact(&model, &rho0, &g, None).unwrap();
        assert_eq!(out[2].entries(), rho0.entries());
    }

    #[test]
    fn dicke_pair_closed_form() {
        let rule = ConstraintRule::dicke(Boundary::Periodic);
        let model = EffectiveModel::new(rule.clone(), 1.0);
        let rho0 = DensityMatrix::from_pure(&PureState::all_up(2).unwrap()).unwrap();
        let g = TimeGrid::new(0.0, 3.0, 7).unwrap();
        let out = evolve_master_exact(&model, &rho0, &g, Some(1e-3)).unwrap();
        for (i, t) in g.times().into_iter().enumerate() {
            let exact = (-2.0 * t).exp() * (1.0 + t);
            assert!((out[i].expect(Observable::Density, &rule) - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn trace_and_hermiticity_kept_with_all_channels() {
        let rule = ConstraintRule::east(Boundary::Open);
        let model = EffectiveModel::new(rule, 1.0)
            .with_chi(0.4)
            .with_loss(0.2)
            .with_dephasing(0.3, 0.5)
            .with_tail(0.7);
        let rho0 = DensityMatrix::from_pure(&PureState::all_up(4).unwrap()).unwrap();
        let g = TimeGrid::new(0.0, 2.0, 5).unwrap();
        for rho in evolve_master_exact(&model, &rho0, &g, None).unwrap() {
            rho.validate().unwrap();
        }
    }
}
