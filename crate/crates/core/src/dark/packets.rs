use super::bitstrings::{extendable_zeros, facilitable_zeros, is_independent_set};
use super::kernel::is_dark;
use crate::error::{Error, Result};
use crate::spin::{Boundary, ConstraintRule, PureState, SpinConfig, C64};

/// Residual allowed for constructed packets before they are returned.
const PACKET_TOL: f64 = 1e-12;

fn site_bit(site: i64, n: usize, boundary: Boundary) -> Result<u64> {
    match boundary {
        Boundary::Periodic => Ok(1u64 << (site - 1).rem_euclid(n as i64)),
        Boundary::Open if site >= 1 && site <= n as i64 => Ok(1u64 << (site - 1)),
        Boundary::Open => Err(Error::invalid(format!("site {site} outside the open chain"))),
    }
}

fn check_root(root: &SpinConfig, boundary: Boundary) -> Result<()> {
    if !is_independent_set(root.bits(), root.n_sites(), boundary) {
        return Err(Error::invalid(format!(
            "root {} has adjacent excitations",
            root.to_bitstring()
        )));
    }
    Ok(())
}

fn window(site: usize, lo: i64, hi: i64, n: usize, boundary: Boundary) -> Vec<i64> {
    (site as i64 + lo..=site as i64 + hi)
        .filter_map(|s| match boundary {
            Boundary::Periodic => Some((s - 1).rem_euclid(n as i64) + 1),
            Boundary::Open => (s >= 1 && s <= n as i64).then_some(s),
        })
        .collect()
}

fn assert_dark(state: PureState, boundary: Boundary) -> Result<PureState> {
    let check = is_dark(&ConstraintRule::east(boundary), &state, PACKET_TOL)?;
    if !check.dark {
        return Err(Error::numeric(format!(
            "constructed packet is not dark (residual {:e})",
            check.residual
        )));
    }
    Ok(state)
}

/// Sum of `c · Π σ⁺_s |root⟩` terms.
fn raise_terms(root: &SpinConfig, terms: &[(&[i64], f64)], boundary: Boundary) -> Result<PureState> {
    let n = root.n_sites();
    let mut psi = PureState::zeros(n)?;
    for (sites, c) in terms {
        let mut bits = root.bits();
        for &s in *sites {
            let b = site_bit(s, n, boundary)?;
            if bits & b != 0 {
                return Err(Error::invalid(format!("site {s} already excited")));
            }
            bits |= b;
        }
        psi.amplitudes_mut()[bits as usize] += C64::new(*c, 0.0);
    }
    Ok(psi)
}

/// Dimer packet `(σ_i⁺ − σ_j⁺)|r⟩` for `i, j ∈ S₁(r)`.
pub fn dimer_packet(root: &SpinConfig, i: usize, j: usize, boundary: Boundary) -> Result<PureState> {
    check_root(root, boundary)?;
    let s1 = facilitable_zeros(root, boundary);
    if i == j || !s1.contains(&i) || !s1.contains(&j) {
        return Err(Error::invalid(format!(
            "sites ({i}, {j}) are not two distinct facilitable zeros {s1:?}"
        )));
    }
    let psi = raise_terms(
        root,
        &[(&[i as i64], 1.0), (&[j as i64], -1.0)],
        boundary,
    )?;
    assert_dark(psi, boundary)
}

/// Triple packet with coefficients `(+,+,−,−,−)` on the raised pairs
/// `(i,i+1)`, `(j,j+1)`, `(i,j+1)`, `(i+1,j)`, `(i,j)`, for `i, j ∈ S₂(r)`
/// with disjoint windows `{s-1, …, s+2}`.
pub fn triple_packet(root: &SpinConfig, i: usize, j: usize, boundary: Boundary) -> Result<PureState> {
    check_root(root, boundary)?;
    let n = root.n_sites();
    let s2 = extendable_zeros(root, boundary);
    if i == j || !s2.contains(&i) || !s2.contains(&j) {
        return Err(Error::invalid(format!(
            "sites ({i}, {j}) are not two distinct extendable zeros {s2:?}"
        )));
    }
    let wi = window(i, -1, 2, n, boundary);
    let wj = window(j, -1, 2, n, boundary);
    if wi.iter().any(|s| wj.contains(s)) {
        return Err(Error::invalid(format!("windows of sites {i} and {j} overlap")));
    }
    let (a, b) = (i as i64, j as i64);
    let psi = raise_terms(
        root,
        &[
            (&[a, a + 1], 1.0),
            (&[b, b + 1], 1.0),
            (&[a, b + 1], -1.0),
            (&[a + 1, b], -1.0),
            (&[a, b], -1.0),
        ],
        boundary,
    )?;
    assert_dark(psi, boundary)
}

/// Product `Π (σ_i⁺ − σ_j⁺)|r⟩` of dimer packets whose windows `{s-1, s, s+1}`
/// are pairwise disjoint.
pub fn dimer_product(root: &SpinConfig, pairs: &[(usize, usize)], boundary: Boundary) -> Result<PureState> {
    check_root(root, boundary)?;
    let n = root.n_sites();
    let s1 = facilitable_zeros(root, boundary);
    let mut used: Vec<i64> = Vec::new();
    for &(i, j) in pairs {
        if i == j || !s1.contains(&i) || !s1.contains(&j) {
            return Err(Error::invalid(format!("({i}, {j}) is not a valid dimer pair")));
        }
        for s in [i, j] {
            let w = window(s, -1, 1, n, boundary);
            if w.iter().any(|x| used.contains(x)) {
                return Err(Error::invalid("dimer windows overlap"));
            }
            used.extend(w);
        }
    }
    let mut psi = PureState::basis(*root)?;
    for &(i, j) in pairs {
        let mut next = PureState::zeros(n)?;
        let bi = site_bit(i as i64, n, boundary)?;
        let bj = site_bit(j as i64, n, boundary)?;
        for (b, a) in psi.amplitudes().iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            let b = b as u64;
            if b & bi == 0 {
                next.amplitudes_mut()[(b | bi) as usize] += a;
            }
            if b & bj == 0 {
                next.amplitudes_mut()[(b | bj) as usize] -= a;
            }
        }
        psi = next;
    }
    assert_dark(psi, boundary)
}
