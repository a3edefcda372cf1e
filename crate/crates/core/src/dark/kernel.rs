use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{nullspace, sym_eigen_sorted};
use crate::spin::{
    block_count, f_into, Boundary, ConstraintRule, PureState, Sector, C64,
};

/// Largest chain handled by the sector nullspace solver.
pub const KERNEL_MAX_SITES: usize = 14;

/// Threshold on `⟨N_adj⟩` and `⟨N_tri⟩` separating the dark classes.
pub const CLASS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum DarkClass {
    /// `⟨N_adj⟩ = ⟨N_tri⟩ = 0`.
    Bitstring,
    /// `⟨N_adj⟩ > 0`, `⟨N_tri⟩ = 0`.
    Singlet,
    /// `⟨N_tri⟩ > 0`.
    TriplePlus,
}

impl DarkClass {
    pub fn from_values(nadj: f64, ntri: f64) -> Self {
        if ntri >= CLASS_TOL {
            DarkClass::TriplePlus
        } else if nadj >= CLASS_TOL {
            DarkClass::Singlet
        } else {
            DarkClass::Bitstring
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DarkLabel {
    pub class: DarkClass,
    pub nadj: f64,
    pub ntri: f64,
}

/// Orthonormal kernel of `F` restricted to one excitation sector.
#[derive(Clone, Debug)]
pub struct SectorKernel {
    pub sector: Sector,
    /// Columns are kernel vectors in the sector basis, ordered by class.
    pub vectors: DMatrix<f64>,
    pub labels: Vec<DarkLabel>,
}

impl SectorKernel {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn state(&self, col: usize) -> PureState {
        let mut psi = PureState::zeros(self.sector.n_sites).expect("kernel size checked");
        let amps = psi.amplitudes_mut();
        for (r, &b) in self.sector.configs.iter().enumerate() {
            amps[b as usize] = C64::new(self.vectors[(r, col)], 0.0);
        }
        psi
    }

    /// Squared norm of the component of `v` (sector basis) outside the kernel, relative.
    pub fn projection_residual(&self, v: &DVector<f64>) -> f64 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let proj = &self.vectors * (self.vectors.transpose() * v);
        (v - proj).norm() / norm
    }
}

/// Kernel of `F`, sector by sector.
#[derive(Clone, Debug)]
pub struct DarkBasis {
    pub rule: ConstraintRule,
    pub n_sites: usize,
    pub sectors: Vec<SectorKernel>,
}

impl DarkBasis {
    pub fn boundary(&self) -> Boundary {
        self.rule.boundary()
    }

    pub fn len(&self) -> usize {
        self.sectors.iter().map(|s| s.dim()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every kernel vector with its excitation number and label.
    pub fn vectors(&self) -> impl Iterator<Item = (usize, DarkLabel, PureState)> + '_ {
        self.sectors.iter().flat_map(|s| {
            (0..s.dim()).map(move |c| (s.sector.excitations, s.labels[c], s.state(c)))
        })
    }

    pub fn count(&self, class: DarkClass) -> usize {
        self.sectors
            .iter()
            .flat_map(|s| s.labels.iter())
            .filter(|l| l.class == class)
            .count()
    }
}

fn diag(sector: &Sector, ell: usize, boundary: Boundary) -> DVector<f64> {
    DVector::from_iterator(
        sector.dim(),
        sector
            .configs
            .iter()
            .map(|&b| block_count(b, sector.n_sites, ell, boundary) as f64),
    )
}

/// `K Vᵀ` split by the eigenvalues of `Kᵀ diag(d) K` at `CLASS_TOL`.
fn split_by(k: &DMatrix<f64>, d: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    if k.ncols() == 0 {
        return (k.clone(), k.clone());
    }
    let weighted = DMatrix::from_fn(k.nrows(), k.ncols(), |r, c| d[r] * k[(r, c)]);
    let m = k.transpose() * weighted;
    let m = (&m + m.transpose()) * 0.5;
    let (vals, vecs) = sym_eigen_sorted(m);
    let rotated = k * vecs;
    let zero = vals.iter().filter(|&&v| v < CLASS_TOL).count();
    (
        rotated.columns(0, zero).into_owned(),
        rotated.columns(zero, rotated.ncols() - zero).into_owned(),
    )
}

/// Kernel of `F` on one sector, rotated so each vector has a definite class.
pub fn sector_kernel(rule: &ConstraintRule, sector: &Sector) -> SectorKernel {
    let n = sector.n_sites;
    let boundary = rule.boundary();
    let compiled = rule.compile(n);
    let raw = nullspace(&sector.f_matrix(&compiled));
    let ntri = diag(sector, 3, boundary);
    let nadj = diag(sector, 2, boundary);
    let (no_tri, tri) = split_by(&raw, &ntri);
    let (mut plain, singlet) = split_by(&no_tri, &nadj);

    // Prefer unit vectors when the plain subspace is spanned by dark basis states.
    let unit: Vec<usize> = (0..sector.dim())
        .filter(|&r| {
            nadj[r] == 0.0 && ntri[r] == 0.0 && compiled.emitter_count(sector.configs[r]) == 0
        })
        .collect();
    if unit.len() == plain.ncols() {
        plain = DMatrix::from_fn(sector.dim(), unit.len(), |r, c| {
            if r == unit[c] {
                1.0
            } else {
                0.0
            }
        });
    }

    let cols: Vec<DVector<f64>> = plain
        .column_iter()
        .chain(singlet.column_iter())
        .chain(tri.column_iter())
        .map(|c| c.into_owned())
        .collect();
    let vectors = if cols.is_empty() {
        DMatrix::zeros(sector.dim(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    let labels = cols
        .iter()
        .map(|v| {
            let a = v.component_mul(v).dot(&nadj);
            let t = v.component_mul(v).dot(&ntri);
            DarkLabel {
                class: DarkClass::from_values(a, t),
                nadj: a,
                ntri: t,
            }
        })
        .collect();
    SectorKernel {
        sector: sector.clone(),
        vectors,
        labels,
    }
}

/// Orthonormal, classified basis of `ker F` for an `n`-site chain.
pub fn kernel_basis(rule: &ConstraintRule, n: usize) -> Result<DarkBasis> {
    if n == 0 || n > KERNEL_MAX_SITES {
        return Err(Error::resource(format!(
            "kernel construction supports 1 <= N <= {KERNEL_MAX_SITES}, got {n}"
        )));
    }
    let sectors = Sector::all(n)
        .iter()
        .map(|s| sector_kernel(rule, s))
        .collect();
    Ok(DarkBasis {
        rule: rule.clone(),
        n_sites: n,
        sectors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DarkCheck {
    /// `‖F ψ‖ / ‖ψ‖`.
    pub residual: f64,
    pub dark: bool,
}

/// Whether `F` annihilates `state` to relative tolerance `tol`.
pub fn is_dark(rule: &ConstraintRule, state: &PureState, tol: f64) -> Result<DarkCheck> {
    let norm = state.norm_sqr().sqrt();
    if norm == 0.0 {
        return Err(Error::invalid("zero vector has no darkness verdict"));
    }
    let mut out = vec![C64::new(0.0, 0.0); state.dim()];
    f_into(&rule.compile(state.n_sites()), state.amplitudes(), &mut out);
    let residual = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt() / norm;
    Ok(DarkCheck {
        residual,
        dark: residual < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::SpinConfig;

    #[test]
    fn east_periodic_four_bitstrings() {
        let b = kernel_basis(&ConstraintRule::east(Boundary::Periodic), 4).unwrap();
        assert_eq!(b.count(DarkClass::Bitstring), 7);
    }

    #[test]
    fn open_five_contains_dimer() {
        let b = kernel_basis(&ConstraintRule::east(Boundary::Open), 5).unwrap();
        let s = b.sectors.iter().find(|s| s.sector.excitations == 3).unwrap();
        let mut v = DVector::zeros(s.sector.dim());
        v[s.sector.index_of(0b01011).unwrap()] = 1.0;
        v[s.sector.index_of(0b11001).unwrap()] = -1.0;
        assert!(s.projection_residual(&v) < 1e-10);
    }

    #[test]
    fn dicke_two_site_singlet() {
        let b = kernel_basis(&ConstraintRule::dicke(Boundary::Periodic), 2).unwrap();
        let s = &b.sectors[1];
        assert_eq!(s.dim(), 1);
        let v = s.state(0);
        let a = v.amplitudes();
        assert!((a[1].re + a[2].re).abs() < 1e-12);
        assert!((a[1].re.abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn vectors_are_dark_and_orthonormal() {
        let rule = ConstraintRule::east(Boundary::Periodic);
        let b = kernel_basis(&rule, 8).unwrap();
        for s in &b.sectors {
            let g = s.vectors.transpose() * &s.vectors;
            assert!((g - DMatrix::identity(s.dim(), s.dim())).norm() < 1e-10);
        }
        for (_, label, psi) in b.vectors() {
            assert!(is_dark(&rule, &psi, 1e-10).unwrap().dark);
            assert_eq!(label.class, DarkClass::from_values(label.nadj, label.ntri));
        }
    }

    #[test]
    fn is_dark_examples() {
        let rule = ConstraintRule::east(Boundary::Periodic);
        let alt = PureState::basis(SpinConfig::from_bitstring("1010").unwrap()).unwrap();
        let c = is_dark(&rule, &alt, 1e-10).unwrap();
        assert!(c.dark && c.residual == 0.0);
        let up = PureState::all_up(4).unwrap();
        let c = is_dark(&rule, &up, 1e-10).unwrap();
        assert!(!c.dark && (c.residual - 2.0).abs() < 1e-12);
        assert!(is_dark(&rule, &PureState::zeros(3).unwrap(), 1e-10).is_err());
    }
}
