use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spin::{diagonal_value, f_into, lower_into, raise_into, ConstraintRule, Observable, PureState, C64};

/// Largest chain for dense density matrices.
pub const DENSITY_MAX_SITES: usize = 12;

/// Dense `2^N × 2^N` density matrix in the bitmask basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_sites: usize,
    entries: DMatrix<C64>,
}

fn check_sites(n: usize) -> Result<()> {
    if n == 0 || n > DENSITY_MAX_SITES {
        return Err(Error::resource(format!(
            "density matrices support 1 <= N <= {DENSITY_MAX_SITES}, got {n}"
        )));
    }
    Ok(())
}

impl DensityMatrix {
    /// Wraps `entries` after checking shape, Hermiticity (1e-10), unit trace (1e-10)
    /// and positivity (minimum eigenvalue >= -1e-8).
    pub fn new(n_sites: usize, entries: DMatrix<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(n_sites, entries)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps `entries` checking only the shape.
    pub fn new_unchecked(n_sites: usize, entries: DMatrix<C64>) -> Result<Self> {
        check_sites(n_sites)?;
        let d = 1usize << n_sites;
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::invalid(format!(
                "expected a {d}x{d} matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { n_sites, entries })
    }

    pub fn from_pure(psi: &PureState) -> Result<Self> {
        check_sites(psi.n_sites())?;
        let p = psi.normalized()?;
        let v = nalgebra::DVector::from_column_slice(p.amplitudes());
        Ok(Self {
            n_sites: psi.n_sites(),
            entries: &v * v.adjoint(),
        })
    }

    pub fn maximally_mixed(n_sites: usize) -> Result<Self> {
        check_sites(n_sites)?;
        let d = 1usize << n_sites;
        Ok(Self {
            n_sites,
            entries: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::numeric(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::numeric(format!("density matrix trace {tr} != 1")));
        }
        let min = self.eigenvalues()[0];
        if min < -1e-8 {
            return Err(Error::numeric(format!("density matrix eigenvalue {min:e} < 0")));
        }
        Ok(())
    }

    /// `Tr(ρ O)` for a spin observable.
    pub fn expect(&self, obs: Observable, rule: &ConstraintRule) -> f64 {
        let n = self.n_sites;
        let d = self.dim();
        if let Some(diag) = (0..d)
            .map(|b| diagonal_value(obs, b as u64, n, rule.boundary()))
            .collect::<Option<Vec<f64>>>()
        {
            return (0..d).map(|b| self.entries[(b, b)].re * diag[b]).sum();
        }
        let compiled = rule.compile(n);
        match obs {
            Observable::FdagF => self.sandwich_trace(&|v, o| f_into(&compiled, v, o)),
            Observable::Sperp2 => {
                0.5 * (self.sandwich_trace(&|v, o| lower_into(n, v, o))
                    + self.sandwich_trace(&|v, o| raise_into(n, v, o)))
            }
            _ => unreachable!("diagonal observables handled above"),
        }
    }

    /// `Tr(A ρ A†)` for a real operator `A` given by its action `out += A v`.
    fn sandwich_trace(&self, apply: &dyn Fn(&[C64], &mut [C64])) -> f64 {
        let d = self.dim();
        let zero = C64::new(0.0, 0.0);
        // Y = A ρ, column by column.
        let mut y = DMatrix::from_element(d, d, zero);
        for c in 0..d {
            let col = self.entries.column(c);
            let mut out = y.column_mut(c);
            apply(col.as_slice(), out.as_mut_slice());
        }
        // Tr(Y A†) = Σ_{a,c} Y_{ac} A_{ac}.
        let mut unit = vec![zero; d];
        let mut image = vec![zero; d];
        let mut total = zero;
        for c in 0..d {
            unit[c] = C64::new(1.0, 0.0);
            image.iter_mut().for_each(|z| *z = zero);
            apply(&unit, &mut image);
            unit[c] = zero;
            for (a, w) in image.iter().enumerate() {
                if *w != zero {
                    total += y[(a, c)] * w.conj();
                }
            }
        }
        total.re
    }

    /// `⟨ψ|ρ|ψ⟩` for normalized `ψ`.
    pub fn fidelity_pure(&self, psi: &PureState) -> Result<f64> {
        if psi.n_sites() != self.n_sites {
            return Err(Error::invalid("state and density matrix sizes differ"));
        }
        let p = psi.normalized()?;
        let v = nalgebra::DVector::from_column_slice(p.amplitudes());
        Ok((v.adjoint() * &self.entries * &v)[(0, 0)].re)
    }
}

/// Equal-weight mixture of normalized trajectory states.
pub fn reconstruct_density<'a, I>(snapshots: I) -> Result<DensityMatrix>
where
    I: IntoIterator<Item = &'a PureState>,
{
    let mut acc: Option<DMatrix<C64>> = None;
    let mut n_sites = 0;
    let mut count = 0usize;
    for psi in snapshots {
        if count == 0 {
            check_sites(psi.n_sites())?;
            n_sites = psi.n_sites();
            acc = Some(DMatrix::zeros(psi.dim(), psi.dim()));
        } else if psi.n_sites() != n_sites {
            return Err(Error::invalid("snapshots have different sizes"));
        }
        let p = psi.normalized()?;
        let a = p.amplitudes();
        let m = acc.as_mut().expect("initialized");
        for c in 0..a.len() {
            if a[c] == C64::new(0.0, 0.0) {
                continue;
            }
            let ac = a[c].conj();
            for r in 0..a.len() {
                m[(r, c)] += a[r] * ac;
            }
        }
        count += 1;
    }
    let m = acc.ok_or_else(|| Error::invalid("no snapshots to reconstruct from"))?;
    let rho = DensityMatrix::new_unchecked(n_sites, m * C64::new(1.0 / count as f64, 0.0))?;
    rho.validate()?;
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{expect, Boundary};

    #[test]
    fn single_and_orthogonal_snapshots() {
        let a = PureState::from_terms(&[("01", 1.0), ("10", 1.0)]).unwrap();
        let r = reconstruct_density([&a]).unwrap();
        assert!((r.purity() - 1.0).abs() < 1e-12);
        let b = PureState::from_terms(&[("01", 1.0), ("10", -1.0)]).unwrap();
        let r = reconstruct_density([&a, &b]).unwrap();
        assert!((r.purity() - 0.5).abs() < 1e-12);
        assert!(reconstruct_density(std::iter::empty::<&PureState>()).is_err());
    }

    #[test]
    fn expectations_match_pure_states() {
        let rule = ConstraintRule::east(Boundary::Periodic);
        let psi = PureState::from_terms(&[("110", 0.6), ("011", -0.3), ("111", 0.5), ("010", 0.2)])
            .unwrap()
            .normalized()
            .unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        for obs in [Observable::Density, Observable::Nadj, Observable::FdagF, Observable::Sperp2] {
            assert!((rho.expect(obs, &rule) - expect(obs, &rule, &psi)).abs() < 1e-12, "{obs}");
        }
    }

    #[test]
    fn invalid_matrices_rejected() {
        let m = DMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        assert!(DensityMatrix::new(1, m).is_ok());
        let bad = DMatrix::from_diagonal_element(2, 2, C64::new(1.0, 0.0));
        assert!(DensityMatrix::new(1, bad).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[C64::new(1.5, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-0.5, 0.0)]);
        assert!(DensityMatrix::new(1, neg).is_err());
    }
}
