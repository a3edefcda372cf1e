use serde::Serialize;
use std::collections::BTreeMap;

use super::kernel::KERNEL_MAX_SITES;
use crate::error::{Error, Result};
use crate::spin::{ConstraintRule, Sector};

#[derive(Clone, Debug, Serialize)]
pub struct SectorFragments {
    pub excitations: usize,
    pub dim: usize,
    pub components: usize,
    /// Component size → number of components of that size.
    pub size_histogram: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FragmentationReport {
    pub n_sites: usize,
    pub sectors: Vec<SectorFragments>,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Connected components of each sector under the off-diagonal entries of `F†F`.
pub fn fragmentation_report(rule: &ConstraintRule, n: usize) -> Result<FragmentationReport> {
    if n == 0 || n > KERNEL_MAX_SITES {
        return Err(Error::resource(format!(
            "fragmentation analysis supports 1 <= N <= {KERNEL_MAX_SITES}, got {n}"
        )));
    }
    let compiled = rule.compile(n);
    let sectors = Sector::all(n)
        .into_iter()
        .map(|sector| {
            let mut uf = UnionFind::new(sector.dim());
            // Two configurations connect when they share a child under F.
            let mut by_child: BTreeMap<u64, usize> = BTreeMap::new();
            for (i, &bits) in sector.configs.iter().enumerate() {
                for j in compiled.emitters(bits) {
                    let child = bits ^ (1 << j);
                    match by_child.get(&child) {
                        Some(&first) => uf.union(first, i),
                        None => {
                            by_child.insert(child, i);
                        }
                    }
                }
            }
            let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
            for i in 0..sector.dim() {
                if uf.find(i) == i {
                    *sizes.entry(uf.size[i]).or_default() += 1;
                }
            }
            SectorFragments {
                excitations: sector.excitations,
                dim: sector.dim(),
                components: sizes.values().sum(),
                size_histogram: sizes,
            }
        })
        .collect();
    Ok(FragmentationReport { n_sites: n, sectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Boundary;

    #[test]
    fn sizes_sum_to_dimension() {
        let r = fragmentation_report(&ConstraintRule::east(Boundary::Periodic), 10).unwrap();
        for s in &r.sectors {
            let total: usize = s.size_histogram.iter().map(|(k, v)| k * v).sum();
            assert_eq!(total, s.dim);
        }
        assert_eq!(r.sectors[10].components, 1);
        assert!(r.sectors[3..6].iter().all(|s| s.components > 1));
    }

    #[test]
    fn dicke_sectors_connected() {
        let r = fragmentation_report(&ConstraintRule::dicke(Boundary::Periodic), 8).unwrap();
        assert!(r.sectors.iter().all(|s| s.components == 1));
    }
}
