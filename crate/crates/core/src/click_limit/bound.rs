use rand::Rng;
use serde::Serialize;

use super::layers::Cascade;
use crate::error::{Error, Result};
use crate::spin::{table_len, Boundary, ConstraintRule, SpinConfig};

/// Universal lower bound `(k+1)[N - (2w+1)k]` on the layer-`k` intensity,
/// zero once the window `N - (2w+1)k > 0` closes.
pub fn boolean_lower_bound(w: usize, n: usize, k: usize) -> f64 {
    let free = n as i64 - (2 * w as i64 + 1) * k as i64;
    if free <= 0 {
        return 0.0;
    }
    ((k + 1) as i64 * free) as f64
}

/// `|G_w(S)|`: sites outside `S` whose ring distance to `S` exceeds `w`.
/// `S` is the set of decayed sites (set bits); `G_w(∅)` has all `N` sites.
pub fn isolated_zone_size(decayed: &SpinConfig, w: usize) -> usize {
    let n = decayed.n_sites();
    let bits = decayed.bits();
    if bits == 0 {
        return n;
    }
    (0..n)
        .filter(|&j| {
            (0..=w.min(n / 2)).all(|d| {
                bits >> ((j + d) % n) & 1 == 0 && bits >> ((j + n - d % n) % n) & 1 == 0
            })
        })
        .count()
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundMargin {
    pub k: usize,
    pub intensity: f64,
    pub lower_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub range: usize,
    pub n_sites: usize,
    pub margins: Vec<BoundMargin>,
    /// Number of reachable decay sets checked against the isolated-zone lemma.
    pub zone_checks: usize,
}

impl BoundReport {
    pub fn min_margin(&self) -> f64 {
        self.margins
            .iter()
            .map(|m| m.intensity - m.lower_bound)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Reachable sets inspected per layer for the isolated-zone lemma.
const ZONE_SAMPLES_PER_LAYER: usize = 4096;

/// Checks every in-window layer intensity against [`boolean_lower_bound`] and the
/// isolated-zone lemma on reachable decay sets. Any violation is an error.
pub fn verify_bound(rule: &ConstraintRule, n: usize) -> Result<BoundReport> {
    let w = rule.range();
    let last = rule.table().len() - 1;
    if !rule.table()[last] {
        return Err(Error::invalid("rule must allow emission on the all-ones window"));
    }
    let mut cascade = Cascade::new(rule, n)?;
    let full = crate::spin::full_mask(n);
    let mut margins = Vec::new();
    let mut zone_checks = 0;
    let mut k = 0;
    while n as i64 - (2 * w as i64 + 1) * k as i64 > 0 {
        let layer = cascade.layer();
        let step = (layer.configs.len() / ZONE_SAMPLES_PER_LAYER).max(1);
        for &bits in layer.configs.iter().step_by(step) {
            let decayed = SpinConfig::new(full ^ bits, n)?;
            let zone = isolated_zone_size(&decayed, w) as i64;
            let needed = n as i64 - (2 * w as i64 + 1) * k as i64;
            if zone < needed {
                return Err(Error::numeric(format!(
                    "isolated zone {zone} < {needed} for decay set {}",
                    decayed.to_bitstring()
                )));
            }
            zone_checks += 1;
        }
        let intensity = cascade.advance()?;
        let lower_bound = boolean_lower_bound(w, n, k);
        if intensity < lower_bound * (1.0 - 1e-12) {
            return Err(Error::numeric(format!(
                "layer {k}: intensity {intensity} below bound {lower_bound}"
            )));
        }
        margins.push(BoundMargin {
            k,
            intensity,
            lower_bound,
        });
        k += 1;
    }
    Ok(BoundReport {
        range: w,
        n_sites: n,
        margins,
        zone_checks,
    })
}

/// Uniform random range-`w` truth table conditioned on allowing the all-ones window.
pub fn random_rule<R: Rng>(w: usize, boundary: Boundary, rng: &mut R) -> Result<ConstraintRule> {
    let len = table_len(w)?;
    let mut table: Vec<bool> = (0..len).map(|_| rng.random()).collect();
    table[len - 1] = true;
    ConstraintRule::custom(w, table, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_examples() {
        assert_eq!(boolean_lower_bound(1, 12, 3), 12.0);
        assert_eq!(boolean_lower_bound(2, 9, 0), 9.0);
        assert_eq!(boolean_lower_bound(1, 12, 4), 0.0);
    }

    #[test]
    fn zone_examples() {
        assert_eq!(isolated_zone_size(&SpinConfig::new(0, 10).unwrap(), 1), 10);
        let one = SpinConfig::from_bitstring("1000000000").unwrap();
        assert_eq!(isolated_zone_size(&one, 1), 7);
        assert_eq!(isolated_zone_size(&SpinConfig::all_up(10).unwrap(), 1), 0);
        assert_eq!(isolated_zone_size(&one, 2), 5);
    }

    #[test]
    fn named_rules_pass() {
        for r in [
            ConstraintRule::east(Boundary::Periodic),
            ConstraintRule::and(Boundary::Periodic),
            ConstraintRule::or(Boundary::Periodic),
        ] {
            let rep = verify_bound(&r, 12).unwrap();
            assert_eq!(rep.margins.len(), 4);
            assert!(rep.min_margin() >= 0.0);
            assert!(rep.zone_checks > 0);
        }
    }
}
