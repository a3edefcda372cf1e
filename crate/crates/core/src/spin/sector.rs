use nalgebra::DMatrix;

use super::rule::CompiledRule;

/// Basis states with a fixed number of excitations `k`, in ascending bitmask order.
///
/// `F` lowers `k` by one, so `F†F` is block diagonal over sectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sector {
    pub n_sites: usize,
    pub excitations: usize,
    pub configs: Vec<u64>,
}

impl Sector {
    pub fn new(n_sites: usize, excitations: usize) -> Self {
        let configs = if excitations > n_sites {
            Vec::new()
        } else {
            combinations(n_sites, excitations)
        };
        Self {
            n_sites,
            excitations,
            configs,
        }
    }

    /// All `N + 1` sectors, ordered by excitation number.
    pub fn all(n_sites: usize) -> Vec<Self> {
        (0..=n_sites).map(|k| Self::new(n_sites, k)).collect()
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn index_of(&self, bits: u64) -> Option<usize> {
        self.configs.binary_search(&bits).ok()
    }

    /// Matrix of `F` from this sector into the sector with one fewer excitation.
    pub fn f_matrix(&self, rule: &CompiledRule) -> DMatrix<f64> {
        let below = Sector::new(self.n_sites, self.excitations.saturating_sub(1));
        let rows = if self.excitations == 0 { 0 } else { below.dim() };
        let mut m = DMatrix::zeros(rows, self.dim());
        if rows == 0 {
            return m;
        }
        for (c, &bits) in self.configs.iter().enumerate() {
            for j in rule.emitters(bits) {
                let r = below.index_of(bits ^ (1 << j)).expect("child in lower sector");
                m[(r, c)] += 1.0;
            }
        }
        m
    }

    /// Dense `F†F` block on this sector.
    pub fn fdagf_matrix(&self, rule: &CompiledRule) -> DMatrix<f64> {
        let f = self.f_matrix(rule);
        f.transpose() * f
    }
}

/// All `n`-bit masks with exactly `k` set bits, ascending.
pub fn combinations(n: usize, k: usize) -> Vec<u64> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut v: u64 = (1u64 << k) - 1;
    let limit = 1u64 << n;
    while v < limit {
        out.push(v);
        // Gosper's hack: next integer with the same popcount.
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{Boundary, ConstraintRule};

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 0), vec![0]);
        assert_eq!(combinations(3, 3), vec![7]);
        assert!(combinations(6, 3).windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fdagf_diagonal_counts_emitters() {
        let r = ConstraintRule::east(Boundary::Periodic).compile(5);
        for s in Sector::all(5) {
            let m = s.fdagf_matrix(&r);
            for (i, &b) in s.configs.iter().enumerate() {
                assert_eq!(m[(i, i)], r.emitter_count(b) as f64);
            }
        }
    }
}
