use super::rule::{CompiledRule, ConstraintRule};
use super::state::{PureState, SparseState, C64};
use crate::error::Result;

/// `out += F ψ` on dense amplitude slices.
pub fn f_into(rule: &CompiledRule, psi: &[C64], out: &mut [C64]) {
    for (b, a) in psi.iter().enumerate() {
        if a.re == 0.0 && a.im == 0.0 {
            continue;
        }
        let bits = b as u64;
        for j in rule.emitters(bits) {
            out[b ^ (1 << j)] += a;
        }
    }
}

/// `out += F† ψ` on dense amplitude slices.
pub fn fdag_into(rule: &CompiledRule, psi: &[C64], out: &mut [C64]) {
    let n = rule.n_sites();
    for (b, a) in psi.iter().enumerate() {
        if a.re == 0.0 && a.im == 0.0 {
            continue;
        }
        let bits = b as u64;
        for j in 0..n {
            if bits >> j & 1 == 0 && rule.allows(bits, j) {
                out[b | (1 << j)] += a;
            }
        }
    }
}

/// `out += S⁻ ψ`.
pub fn lower_into(n: usize, psi: &[C64], out: &mut [C64]) {
    for (b, a) in psi.iter().enumerate() {
        for j in 0..n {
            if b >> j & 1 == 1 {
                out[b ^ (1 << j)] += a;
            }
        }
    }
}

/// `out += S⁺ ψ`.
pub fn raise_into(n: usize, psi: &[C64], out: &mut [C64]) {
    for (b, a) in psi.iter().enumerate() {
        for j in 0..n {
            if b >> j & 1 == 0 {
                out[b | (1 << j)] += a;
            }
        }
    }
}

/// Operations that act on both dense and sparse states.
pub trait SpinOperand: Sized {
    fn apply_f(&self, rule: &ConstraintRule) -> Self;
    fn apply_fdag(&self, rule: &ConstraintRule) -> Self;
}

impl SpinOperand for PureState {
    fn apply_f(&self, rule: &ConstraintRule) -> Self {
        let c = rule.compile(self.n_sites());
        let mut out = PureState::zeros(self.n_sites()).expect("same size as input");
        f_into(&c, self.amplitudes(), out.amplitudes_mut());
        out
    }

    fn apply_fdag(&self, rule: &ConstraintRule) -> Self {
        let c = rule.compile(self.n_sites());
        let mut out = PureState::zeros(self.n_sites()).expect("same size as input");
        fdag_into(&c, self.amplitudes(), out.amplitudes_mut());
        out
    }
}

impl SpinOperand for SparseState {
    fn apply_f(&self, rule: &ConstraintRule) -> Self {
        let c = rule.compile(self.n_sites());
        let mut out = SparseState::new(self.n_sites()).expect("same size as input");
        for (bits, a) in self.terms() {
            for j in c.emitters(bits) {
                out.add_unchecked(bits ^ (1 << j), a);
            }
        }
        out.prune();
        out
    }

    fn apply_fdag(&self, rule: &ConstraintRule) -> Self {
        let c = rule.compile(self.n_sites());
        let n = self.n_sites();
        let mut out = SparseState::new(n).expect("same size as input");
        for (bits, a) in self.terms() {
            for j in 0..n {
                if bits >> j & 1 == 0 && c.allows(bits, j) {
                    out.add_unchecked(bits | (1 << j), a);
                }
            }
        }
        out.prune();
        out
    }
}

/// `F |state⟩` with `F = Σ_j P_j σ_j⁻`; the result is not normalised.
pub fn apply_f<S: SpinOperand>(rule: &ConstraintRule, state: &S) -> S {
    state.apply_f(rule)
}

/// `F† |state⟩`.
pub fn apply_fdag<S: SpinOperand>(rule: &ConstraintRule, state: &S) -> S {
    state.apply_fdag(rule)
}

/// `σ_j⁻ |ψ⟩` for the 1-based site `j`.
pub fn sigma_minus(psi: &PureState, j: usize) -> Result<PureState> {
    site_op(psi, j, |bits, bit| (bits & bit != 0).then_some((bits ^ bit, 1.0)))
}

/// `σ_j⁺ |ψ⟩` for the 1-based site `j`.
pub fn sigma_plus(psi: &PureState, j: usize) -> Result<PureState> {
    site_op(psi, j, |bits, bit| (bits & bit == 0).then_some((bits | bit, 1.0)))
}

/// `σ_j^z |ψ⟩` for the 1-based site `j`.
pub fn sigma_z(psi: &PureState, j: usize) -> Result<PureState> {
    site_op(psi, j, |bits, bit| {
        Some((bits, if bits & bit != 0 { 1.0 } else { -1.0 }))
    })
}

fn site_op(
    psi: &PureState,
    j: usize,
    f: impl Fn(u64, u64) -> Option<(u64, f64)>,
) -> Result<PureState> {
    let n = psi.n_sites();
    if j == 0 || j > n {
        return Err(crate::Error::invalid(format!("site {j} outside 1..={n}")));
    }
    let bit = 1u64 << (j - 1);
    let mut out = PureState::zeros(n)?;
    let o = out.amplitudes_mut();
    for (b, a) in psi.amplitudes().iter().enumerate() {
        if let Some((t, s)) = f(b as u64, bit) {
            o[t as usize] += a * s;
        }
    }
    Ok(out)
}

/// `S^z |ψ⟩` with `S^z = ½ Σ σ_j^z`.
pub fn total_sz(psi: &PureState) -> PureState {
    let n = psi.n_sites() as f64;
    let amps = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(b, a)| a * ((b as u64).count_ones() as f64 - n / 2.0))
        .collect();
    PureState::from_amplitudes(psi.n_sites(), amps).expect("same size as input")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{Boundary, SpinConfig};

    fn st(terms: &[(&str, f64)]) -> PureState {
        PureState::from_terms(terms).unwrap()
    }

    #[test]
    fn east_three_site_example() {
        let r = ConstraintRule::east(Boundary::Periodic);
        assert_eq!(apply_f(&r, &st(&[("110", 1.0)])), st(&[("100", 1.0)]));
        assert_eq!(apply_fdag(&r, &st(&[("100", 1.0)])), st(&[("110", 1.0)]));
    }

    #[test]
    fn east_two_site_both_facilitated() {
        let r = ConstraintRule::east(Boundary::Periodic);
        assert_eq!(
            apply_f(&r, &st(&[("11", 1.0)])),
            st(&[("01", 1.0), ("10", 1.0)])
        );
    }

    #[test]
    fn dicke_ground_state_annihilated() {
        let r = ConstraintRule::dicke(Boundary::Periodic);
        let out = apply_f(&r, &st(&[("0", 1.0)]));
        assert_eq!(out.norm_sqr(), 0.0);
    }

    #[test]
    fn fdag_kills_fully_up() {
        for r in [
            ConstraintRule::dicke(Boundary::Periodic),
            ConstraintRule::east(Boundary::Open),
            ConstraintRule::and(Boundary::Periodic),
            ConstraintRule::or(Boundary::Open),
        ] {
            assert_eq!(apply_fdag(&r, &PureState::all_up(5).unwrap()).norm_sqr(), 0.0);
        }
    }

    #[test]
    fn sparse_matches_dense() {
        let r = ConstraintRule::or(Boundary::Open);
        let dense = PureState::all_up(6).unwrap();
        let sparse = SparseState::all_up(6).unwrap();
        let d2 = apply_f(&r, &apply_f(&r, &dense));
        let s2 = apply_f(&r, &apply_f(&r, &sparse));
        assert_eq!(s2.to_dense().unwrap(), d2);
        let back = apply_fdag(&r, &s2).to_dense().unwrap();
        assert_eq!(back, apply_fdag(&r, &d2));
    }

    #[test]
    fn site_operators() {
        let psi = PureState::basis(SpinConfig::from_bitstring("10").unwrap()).unwrap();
        assert_eq!(sigma_minus(&psi, 1).unwrap(), st(&[("00", 1.0)]));
        assert_eq!(sigma_plus(&psi, 2).unwrap(), st(&[("11", 1.0)]));
        assert_eq!(sigma_z(&psi, 2).unwrap(), st(&[("10", -1.0)]));
        assert!(sigma_z(&psi, 3).is_err());
    }
}
