use crate::error::{Error, Result};
use crate::spin::{Boundary, SpinConfig, MAX_SITES};

/// True when no two adjacent sites are excited (wrap pair included iff periodic).
pub fn is_independent_set(bits: u64, n: usize, boundary: Boundary) -> bool {
    let shifted = bits >> 1;
    if bits & shifted != 0 {
        return false;
    }
    !(boundary == Boundary::Periodic && n > 1 && bits & 1 == 1 && bits >> (n - 1) & 1 == 1)
}

/// All independent-set configurations, ascending by bitmask.
pub fn enumerate_bitstring_dark(n: usize, boundary: Boundary) -> Result<Vec<SpinConfig>> {
    if n == 0 || n > MAX_SITES {
        return Err(Error::invalid(format!("chain length {n} outside 1..={MAX_SITES}")));
    }
    let mut path = Vec::new();
    grow(0, 0, n, &mut path);
    path.retain(|&b| is_independent_set(b, n, boundary));
    path.sort_unstable();
    path.into_iter().map(|b| SpinConfig::new(b, n)).collect()
}

fn grow(bits: u64, pos: usize, n: usize, out: &mut Vec<u64>) {
    if pos == n {
        out.push(bits);
        return;
    }
    grow(bits, pos + 1, n, out);
    if pos == 0 || bits >> (pos - 1) & 1 == 0 {
        grow(bits | 1 << pos, pos + 1, n, out);
    }
}

fn occ(bits: u64, n: usize, site: i64, boundary: Boundary) -> bool {
    match boundary {
        Boundary::Periodic => bits >> (site - 1).rem_euclid(n as i64) & 1 == 1,
        Boundary::Open => site >= 1 && site <= n as i64 && bits >> (site - 1) & 1 == 1,
    }
}

/// Facilitable zeros `S₁(r)`: `r_{i-1} = 1`, `r_i = 0` and `r_{i+1} = 0`
/// (or `i = N` on an open chain). Sites are 1-based.
pub fn facilitable_zeros(root: &SpinConfig, boundary: Boundary) -> Vec<usize> {
    let (bits, n) = (root.bits(), root.n_sites());
    let first = if boundary == Boundary::Open { 2 } else { 1 };
    (first..=n)
        .filter(|&i| {
            let i = i as i64;
            occ(bits, n, i - 1, boundary)
                && !occ(bits, n, i, boundary)
                && !occ(bits, n, i + 1, boundary)
        })
        .collect()
}

/// Extendable facilitable zeros `S₂(r)`: `r_{i-1} r_i r_{i+1} r_{i+2} = 1000`,
/// with `i + 1` inside the chain; on open chains sites past the edge read as 0.
pub fn extendable_zeros(root: &SpinConfig, boundary: Boundary) -> Vec<usize> {
    let (bits, n) = (root.bits(), root.n_sites());
    if boundary == Boundary::Periodic && n < 4 {
        return Vec::new();
    }
    let (first, last) = match boundary {
        Boundary::Open => (2, n.saturating_sub(1)),
        Boundary::Periodic => (1, n),
    };
    (first..=last)
        .filter(|&i| {
            let i = i as i64;
            occ(bits, n, i - 1, boundary)
                && !occ(bits, n, i, boundary)
                && !occ(bits, n, i + 1, boundary)
                && !occ(bits, n, i + 2, boundary)
        })
        .collect()
}
