//! Mixed-state entanglement: logarithmic negativity, mutual information and the
//! adjacent-pair witness on the dark manifold.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::spin::{ConstraintRule, Observable, C64};

/// Split of the chain into `A` and its complement `B` (1-based sites).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Bipartition {
    n_sites: usize,
    a: Vec<usize>,
}

impl Bipartition {
    pub fn new(n_sites: usize, mut a: Vec<usize>) -> Result<Self> {
        a.sort_unstable();
        a.dedup();
        if a.is_empty() || a.len() >= n_sites || a.iter().any(|&s| s == 0 || s > n_sites) {
            return Err(Error::invalid(format!(
                "subsystem {a:?} must be a nonempty proper subset of 1..={n_sites}"
            )));
        }
        Ok(Self { n_sites, a })
    }

    /// `A` = the first `⌈N/2⌉` sites.
    pub fn half(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, (1..=n_sites.div_ceil(2)).collect())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn a(&self) -> &[usize] {
        &self.a
    }

    /// Bitmask of the `B` sites.
    pub fn b_mask(&self) -> usize {
        let a_mask: usize = self.a.iter().map(|s| 1usize << (s - 1)).sum();
        ((1usize << self.n_sites) - 1) & !a_mask
    }
}

/// `ρ^{T_B}`: swaps the `B` bits between row and column indices.
pub fn partial_transpose(rho: &DMatrix<C64>, part: &Bipartition) -> Result<DMatrix<C64>> {
    let d = 1usize << part.n_sites();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, bipartition needs {d}x{d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let mb = part.b_mask();
    Ok(DMatrix::from_fn(d, d, |r, c| {
        let r2 = (r & !mb) | (c & mb);
        let c2 = (c & !mb) | (r & mb);
        rho[(r2, c2)]
    }))
}

fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    let err = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if err > 1e-10 {
        return Err(Error::invalid(format!("matrix not Hermitian ({err:e})")));
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    Ok(h.symmetric_eigenvalues().iter().copied().collect())
}

/// `ln ‖ρ^{T_B}‖₁`; values in `(-1e-10, 0)` are reported as 0.
pub fn log_negativity(rho: &DensityMatrix, part: &Bipartition) -> Result<f64> {
    if rho.n_sites() != part.n_sites() {
        return Err(Error::invalid("bipartition and state sizes differ"));
    }
    let pt = partial_transpose(rho.entries(), part)?;
    let trace_norm: f64 = hermitian_eigenvalues(&pt)?.iter().map(|l| l.abs()).sum();
    let e = trace_norm.ln();
    Ok(if e < 0.0 && e > -1e-10 { 0.0 } else { e })
}

/// Reduced density matrix on `keep` (1-based, ascending), in the bit order of `keep`.
pub fn partial_trace(rho: &DMatrix<C64>, n_sites: usize, keep: &[usize]) -> DMatrix<C64> {
    let m = keep.len();
    let keep_mask: usize = keep.iter().map(|s| 1usize << (s - 1)).sum();
    let compress = |b: usize| -> usize {
        keep.iter()
            .enumerate()
            .map(|(i, s)| ((b >> (s - 1)) & 1) << i)
            .sum()
    };
    let mut out = DMatrix::from_element(1 << m, 1 << m, C64::new(0.0, 0.0));
    let d = 1usize << n_sites;
    for c in 0..d {
        for r in 0..d {
            if (r & !keep_mask) == (c & !keep_mask) {
                out[(compress(r), compress(c))] += rho[(r, c)];
            }
        }
    }
    out
}

/// Von Neumann entropy with the natural logarithm.
pub fn von_neumann_entropy(rho: &DMatrix<C64>) -> Result<f64> {
    Ok(hermitian_eigenvalues(rho)?
        .into_iter()
        .filter(|&l| l > 1e-14)
        .map(|l| -l * l.ln())
        .sum())
}

/// `I_ij = S(ρ_i) + S(ρ_j) − S(ρ_ij)` (natural log), zero on the diagonal.
pub fn mutual_information_matrix(rho: &DensityMatrix) -> Result<DMatrix<f64>> {
    let n = rho.n_sites();
    let e = rho.entries();
    let single: Vec<f64> = (1..=n)
        .map(|i| von_neumann_entropy(&partial_trace(e, n, &[i])))
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(n, n);
    for i in 1..=n {
        for j in i + 1..=n {
            let s_ij = von_neumann_entropy(&partial_trace(e, n, &[i, j]))?;
            let v = single[i - 1] + single[j - 1] - s_ij;
            out[(i - 1, j - 1)] = v;
            out[(j - 1, i - 1)] = v;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Entangled,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    /// `Tr(ρ F†F)`.
    pub dark_residual: f64,
    /// `Tr(ρ N_adj)`.
    pub nadj: f64,
    pub verdict: Verdict,
}

/// Adjacent-pair witness: a dark state with `⟨N_adj⟩ > 0` is entangled.
pub fn witness(rho: &DensityMatrix, rule: &ConstraintRule, tol: f64) -> WitnessReport {
    let dark_residual = rho.expect(Observable::FdagF, rule);
    let nadj = rho.expect(Observable::Nadj, rule);
    let verdict = if dark_residual < tol && nadj > tol {
        Verdict::Entangled
    } else {
        Verdict::Inconclusive
    };
    WitnessReport {
        dark_residual,
        nadj,
        verdict,
    }
}

/// `⟨F†F⟩` for the periodic East rule on a product state with up
/// probabilities `p_j` and coherences `s_j = ⟨σ_j⁻⟩`:
/// `Σ_j p_{j-1} p_j + Σ_{i≠j} p_{i-1} p_{j-1} s_i* s_j`, where the second sum
/// skips neighbouring `i, j` (those terms contain `σ⁺n` or `nσ⁻` on one site).
pub fn product_state_fdagf(p: &[f64], s: &[C64]) -> Result<f64> {
    let n = p.len();
    if n == 0 || s.len() != n {
        return Err(Error::invalid("p and s must be nonempty and of equal length"));
    }
    for j in 0..n {
        if !(0.0..=1.0).contains(&p[j]) {
            return Err(Error::invalid(format!("p[{j}] = {} outside [0, 1]", p[j])));
        }
        if s[j].norm_sqr() > p[j] * (1.0 - p[j]) + 1e-12 {
            return Err(Error::invalid(format!("|s[{j}]|^2 exceeds p(1-p)")));
        }
    }
    let left = |j: usize| (j + n - 1) % n;
    let mut total: f64 = (0..n).map(|j| p[left(j)] * p[j]).sum();
    for i in 0..n {
        for j in 0..n {
            if i == j || left(j) == i || left(i) == j {
                continue;
            }
            total += (p[left(i)] * p[left(j)] * s[i].conj() * s[j]).re;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{expect, Boundary, PureState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bell() -> DensityMatrix {
        DensityMatrix::from_pure(&PureState::from_terms(&[("01", 1.0), ("10", 1.0)]).unwrap()).unwrap()
    }

    #[test]
    fn bell_pair_values() {
        let part = Bipartition::half(2).unwrap();
        let rho = bell();
        assert!((log_negativity(&rho, &part).unwrap() - 2f64.ln()).abs() < 1e-12);
        let pt = partial_transpose(rho.entries(), &part).unwrap();
        let ev = hermitian_eigenvalues(&pt).unwrap();
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((min + 0.5).abs() < 1e-12);
        let i = mutual_information_matrix(&rho).unwrap();
        assert!((i[(0, 1)] - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(i[(0, 0)], 0.0);
    }

    #[test]
    fn separable_inputs_give_zero() {
        let part = Bipartition::half(3).unwrap();
        assert_eq!(part.a(), &[1, 2]);
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        assert_eq!(log_negativity(&mixed, &part).unwrap(), 0.0);
        let prod = PureState::product(&[
            (C64::new(0.6, 0.0), C64::new(0.8, 0.0)),
            (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            (C64::new(0.0, 0.6), C64::new(0.8, 0.0)),
        ])
        .unwrap();
        let rho = DensityMatrix::from_pure(&prod).unwrap();
        assert!(log_negativity(&rho, &part).unwrap().abs() < 1e-12);
        assert!(mutual_information_matrix(&rho).unwrap().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn partial_transpose_is_involutive() {
        let psi = PureState::from_terms(&[("011", 0.3), ("101", -0.7), ("110", 0.2), ("000", 0.5)]).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let part = Bipartition::new(3, vec![2]).unwrap();
        let twice = partial_transpose(&partial_transpose(rho.entries(), &part).unwrap(), &part).unwrap();
        assert_eq!(&twice, rho.entries());
        assert!(partial_transpose(rho.entries(), &Bipartition::half(2).unwrap()).is_err());
    }

    #[test]
    fn dimer_packet_witness_and_correlation() {
        let rule = ConstraintRule::east(Boundary::Open);
        let psi = PureState::from_terms(&[("11010", 1.0), ("10011", -1.0)]).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let w = witness(&rho, &rule, 1e-8);
        assert_eq!(w.verdict, Verdict::Entangled);
        assert!(w.dark_residual.abs() < 1e-12 && (w.nadj - 1.0).abs() < 1e-12);
        assert!(mutual_information_matrix(&rho).unwrap()[(1, 4)] > 0.1);

        let up = DensityMatrix::from_pure(&PureState::all_up(5).unwrap()).unwrap();
        let w = witness(&up, &ConstraintRule::east(Boundary::Periodic), 1e-8);
        assert_eq!(w.verdict, Verdict::Inconclusive);
        assert!((w.dark_residual - 5.0).abs() < 1e-12);
    }

    #[test]
    fn product_formula_matches_state_vector() {
        let rule = ConstraintRule::east(Boundary::Periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 2..=7 {
            for _ in 0..20 {
                let mut sites = Vec::new();
                let mut p = Vec::new();
                let mut s = Vec::new();
                for _ in 0..n {
                    let pj: f64 = rng.random();
                    let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                    let up = C64::from_polar(pj.sqrt(), phi);
                    let down = C64::new((1.0 - pj).sqrt(), 0.0);
                    sites.push((down, up));
                    p.push(pj);
                    s.push(down.conj() * up);
                }
                let psi = PureState::product(&sites).unwrap();
                let exact = expect(Observable::FdagF, &rule, &psi);
                assert!((product_state_fdagf(&p, &s).unwrap() - exact).abs() < 1e-10, "n={n}");
            }
        }
        assert_eq!(product_state_fdagf(&[1.0; 6], &[C64::new(0.0, 0.0); 6]).unwrap(), 6.0);
        let alt = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(product_state_fdagf(&alt, &[C64::new(0.0, 0.0); 4]).unwrap(), 0.0);
        assert!(product_state_fdagf(&[0.5], &[C64::new(0.6, 0.0)]).is_err());
    }
}
