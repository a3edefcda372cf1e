use serde::{Deserialize, Serialize};

use super::config::SpinConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Dicke,
    East,
    And,
    Or,
    Custom,
}

/// Local Boolean gate `P_j` deciding whether site `j` may emit.
///
/// The truth table is indexed by the `2w` neighbour occupations in the order
/// `j-w, ..., j-1, j+1, ..., j+w`, the `m`-th neighbour supplying bit `m` of
/// the index. For `w = 1` bit 0 is the left neighbour and bit 1 the right one.
///
/// On open chains, neighbours beyond the edge read as `fill`. The East rule
/// defaults to `fill = false`, so site 1 never emits; the other rules default
/// to `fill = true`. On periodic rings shorter than `2w + 1`, a neighbour that
/// wraps onto `j` itself also reads as `fill`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintRule {
    kind: RuleKind,
    range: usize,
    table: Vec<bool>,
    boundary: Boundary,
    fill: bool,
}

impl ConstraintRule {
    pub fn dicke(boundary: Boundary) -> Self {
        Self {
            kind: RuleKind::Dicke,
            range: 0,
            table: vec![true],
            boundary,
            fill: true,
        }
    }

    pub fn east(boundary: Boundary) -> Self {
        Self {
            kind: RuleKind::East,
            range: 1,
            table: vec![false, true, false, true],
            boundary,
            fill: false,
        }
    }

    pub fn and(boundary: Boundary) -> Self {
        Self {
            kind: RuleKind::And,
            range: 1,
            table: vec![false, false, false, true],
            boundary,
            fill: true,
        }
    }

    pub fn or(boundary: Boundary) -> Self {
        Self {
            kind: RuleKind::Or,
            range: 1,
            table: vec![false, true, true, true],
            boundary,
            fill: true,
        }
    }

    /// Range-`w` rule from an explicit truth table of length `4^w`.
    pub fn custom(range: usize, table: Vec<bool>, boundary: Boundary) -> Result<Self> {
        let expected = table_len(range)?;
        if table.len() != expected {
            return Err(Error::invalid(format!(
                "truth table for range {range} must have {expected} entries, got {}",
                table.len()
            )));
        }
        if !table[expected - 1] {
            return Err(Error::invalid(
                "truth table must allow emission when all neighbours are excited",
            ));
        }
        Ok(Self {
            kind: RuleKind::Custom,
            range,
            table,
            boundary,
            fill: true,
        })
    }

    /// Builds one of the named rules.
    pub fn named(kind: RuleKind, boundary: Boundary) -> Result<Self> {
        match kind {
            RuleKind::Dicke => Ok(Self::dicke(boundary)),
            RuleKind::East => Ok(Self::east(boundary)),
            RuleKind::And => Ok(Self::and(boundary)),
            RuleKind::Or => Ok(Self::or(boundary)),
            RuleKind::Custom => Err(Error::invalid("custom rules need a truth table")),
        }
    }

    pub fn with_fill(mut self, fill: bool) -> Self {
        self.fill = fill;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn fill(&self) -> bool {
        self.fill
    }

    /// `(α, β, γ)` coefficients of the phase-space projector
    /// `P = α n_{j-1} + β n_{j+1} + γ n_{j-1} n_{j+1}`, when the rule has that form.
    /// The unconstrained rule (`P = 1`) has none.
    pub fn projector_coefficients(&self) -> Option<(f64, f64, f64)> {
        match self.kind {
            RuleKind::Dicke => None,
            RuleKind::East => Some((1.0, 0.0, 0.0)),
            RuleKind::And => Some((0.0, 0.0, 1.0)),
            RuleKind::Or => Some((1.0, 1.0, -1.0)),
            RuleKind::Custom => None,
        }
    }

    /// Whether site `j0` (0-based) may emit in configuration `bits` of an `n`-site chain.
    #[inline]
    pub fn allows_bits(&self, bits: u64, n: usize, j0: usize) -> bool {
        let w = self.range;
        if w == 0 {
            return self.table[0];
        }
        let mut idx = 0usize;
        for m in 0..2 * w {
            let off = if m < w {
                m as i64 - w as i64
            } else {
                (m - w) as i64 + 1
            };
            if self.neighbour(bits, n, j0, off) {
                idx |= 1 << m;
            }
        }
        self.table[idx]
    }

    #[inline]
    fn neighbour(&self, bits: u64, n: usize, j0: usize, off: i64) -> bool {
        let p = j0 as i64 + off;
        match self.boundary {
            Boundary::Open => {
                if p < 0 || p >= n as i64 {
                    self.fill
                } else {
                    bits >> p & 1 == 1
                }
            }
            Boundary::Periodic => {
                let q = p.rem_euclid(n as i64) as usize;
                if q == j0 {
                    self.fill
                } else {
                    bits >> q & 1 == 1
                }
            }
        }
    }

    /// Precomputes the emission pattern for an `n`-site chain.
    pub fn compile(&self, n: usize) -> CompiledRule {
        CompiledRule::new(self, n)
    }
}

/// Truth-table length `2^(2w)` for range `w`.
pub fn table_len(range: usize) -> Result<usize> {
    if range > 4 {
        return Err(Error::invalid(format!("rule range {range} exceeds 4")));
    }
    Ok(1usize << (2 * range))
}

/// `P_j` evaluated on `config` for the 1-based site `j`.
pub fn constraint_allows(rule: &ConstraintRule, config: &SpinConfig, j: usize) -> Result<bool> {
    let n = config.n_sites();
    if j == 0 || j > n {
        return Err(Error::invalid(format!("site {j} outside 1..={n}")));
    }
    Ok(rule.allows_bits(config.bits(), n, j - 1))
}

/// A rule specialised to a chain length, with per-site neighbour positions
/// resolved once. `None` marks an out-of-range neighbour read as `fill`.
#[derive(Clone, Debug)]
pub struct CompiledRule {
    n: usize,
    table: Vec<bool>,
    fill: bool,
    neighbours: Vec<Vec<Option<u32>>>,
}

impl CompiledRule {
    fn new(rule: &ConstraintRule, n: usize) -> Self {
        let w = rule.range as i64;
        let offsets: Vec<i64> = (-w..0).chain(1..=w).collect();
        let neighbours = (0..n)
            .map(|j0| {
                offsets
                    .iter()
                    .map(|&off| {
                        let p = j0 as i64 + off;
                        match rule.boundary {
                            Boundary::Open => {
                                (p >= 0 && p < n as i64).then_some(p as u32)
                            }
                            Boundary::Periodic => {
                                let q = p.rem_euclid(n as i64) as usize;
                                (q != j0).then_some(q as u32)
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            n,
            table: rule.table.clone(),
            fill: rule.fill,
            neighbours,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn allows(&self, bits: u64, j0: usize) -> bool {
        let mut idx = 0usize;
        for (m, nb) in self.neighbours[j0].iter().enumerate() {
            let up = match nb {
                Some(p) => bits >> p & 1 == 1,
                None => self.fill,
            };
            if up {
                idx |= 1 << m;
            }
        }
        self.table[idx]
    }

    /// Sites (0-based) that are excited and facilitated in `bits`.
    #[inline]
    pub fn emitters(&self, bits: u64) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| bits >> j & 1 == 1 && self.allows(bits, j))
    }

    /// Number of facilitated excited sites, the diagonal of `F†F` on a basis state.
    pub fn emitter_count(&self, bits: u64) -> usize {
        self.emitters(bits).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> SpinConfig {
        SpinConfig::from_bitstring(s).unwrap()
    }

    #[test]
    fn east_left_neighbour_facilitates() {
        let r = ConstraintRule::east(Boundary::Periodic);
        assert!(constraint_allows(&r, &cfg("110"), 2).unwrap());
        assert!(!constraint_allows(&r, &cfg("110"), 1).unwrap());
        assert!(constraint_allows(&r, &cfg("001"), 1).unwrap());
    }

    #[test]
    fn and_all_up_always_allows() {
        let r = ConstraintRule::and(Boundary::Periodic);
        for j in 1..=5 {
            assert!(constraint_allows(&r, &cfg("11111"), j).unwrap());
        }
    }

    #[test]
    fn or_right_neighbour() {
        let r = ConstraintRule::or(Boundary::Periodic);
        assert!(constraint_allows(&r, &cfg("010"), 1).unwrap());
        assert!(!constraint_allows(&r, &cfg("010"), 2).unwrap());
    }

    #[test]
    fn open_east_first_site_never_emits() {
        let r = ConstraintRule::east(Boundary::Open);
        assert!(!constraint_allows(&r, &cfg("111"), 1).unwrap());
        let r1 = r.clone().with_fill(true);
        assert!(constraint_allows(&r1, &cfg("111"), 1).unwrap());
        let and = ConstraintRule::and(Boundary::Open);
        assert!(constraint_allows(&and, &cfg("11"), 1).unwrap());
    }

    #[test]
    fn custom_table_validation() {
        assert!(ConstraintRule::custom(2, vec![true; 15], Boundary::Periodic).is_err());
        let mut t = vec![false; 16];
        assert!(ConstraintRule::custom(2, t.clone(), Boundary::Periodic).is_err());
        t[15] = true;
        assert!(ConstraintRule::custom(2, t, Boundary::Periodic).is_ok());
    }

    #[test]
    fn compiled_matches_direct() {
        let rules = [
            ConstraintRule::east(Boundary::Open),
            ConstraintRule::or(Boundary::Periodic),
            ConstraintRule::custom(2, (0..16).map(|i| i % 3 != 1).collect(), Boundary::Open)
                .unwrap(),
        ];
        for r in &rules {
            let c = r.compile(6);
            for bits in 0..64u64 {
                for j in 0..6 {
                    assert_eq!(c.allows(bits, j), r.allows_bits(bits, 6, j));
                }
            }
        }
    }

    #[test]
    fn site_index_out_of_range() {
        let r = ConstraintRule::east(Boundary::Periodic);
        assert!(constraint_allows(&r, &cfg("110"), 0).is_err());
        assert!(constraint_allows(&r, &cfg("110"), 4).is_err());
    }
}
