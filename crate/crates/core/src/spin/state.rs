use num_complex::Complex64;
use std::collections::BTreeMap;

use super::config::{full_mask, SpinConfig};
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest chain length stored as a dense amplitude vector.
pub const DENSE_MAX_SITES: usize = 24;

/// Dense state vector over the `2^N` computational basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_sites: usize,
    amps: Vec<C64>,
}

pub(crate) fn check_dense(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("chain length must be at least 1"));
    }
    if n > DENSE_MAX_SITES {
        return Err(Error::resource(format!(
            "dense states are limited to N <= {DENSE_MAX_SITES} (got {n}); \
             use the semiclassical solver or closed forms for larger chains"
        )));
    }
    Ok(())
}

impl PureState {
    pub fn zeros(n_sites: usize) -> Result<Self> {
        check_dense(n_sites)?;
        Ok(Self {
            n_sites,
            amps: vec![C64::new(0.0, 0.0); 1 << n_sites],
        })
    }

    pub fn basis(config: SpinConfig) -> Result<Self> {
        let mut s = Self::zeros(config.n_sites())?;
        s.amps[config.bits() as usize] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn all_up(n_sites: usize) -> Result<Self> {
        Self::basis(SpinConfig::all_up(n_sites)?)
    }

    pub fn from_amplitudes(n_sites: usize, amps: Vec<C64>) -> Result<Self> {
        check_dense(n_sites)?;
        if amps.len() != 1 << n_sites {
            return Err(Error::invalid(format!(
                "expected {} amplitudes, got {}",
                1usize << n_sites,
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::numeric("non-finite amplitude"));
        }
        Ok(Self { n_sites, amps })
    }

    /// Superposition `Σ c |bitstring⟩` from printed bitstrings.
    pub fn from_terms(terms: &[(&str, f64)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::invalid("empty term list"))?;
        let n = SpinConfig::from_bitstring(first.0)?.n_sites();
        let mut s = Self::zeros(n)?;
        for (b, c) in terms {
            let cfg = SpinConfig::from_bitstring(b)?;
            if cfg.n_sites() != n {
                return Err(Error::invalid("terms of different length"));
            }
            s.amps[cfg.bits() as usize] += C64::new(*c, 0.0);
        }
        Ok(s)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn amp(&self, config: SpinConfig) -> C64 {
        self.amps[config.bits() as usize]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < 1e-12
    }

    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(Error::numeric("cannot normalize a zero or non-finite vector"));
        }
        let s = 1.0 / n2.sqrt();
        Ok(Self {
            n_sites: self.n_sites,
            amps: self.amps.iter().map(|a| a * s).collect(),
        })
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.same_shape(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn axpy(&mut self, c: C64, other: &Self) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: C64) {
        for a in &mut self.amps {
            *a *= c;
        }
    }

    pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(Error::invalid(format!(
                "state size mismatch: {} vs {} sites",
                self.n_sites, other.n_sites
            )));
        }
        Ok(())
    }

    /// Nonzero components as `(bitstring, amplitude)` sorted by bitmask.
    pub fn support(&self, tol: f64) -> Vec<(String, C64)> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > tol)
            .map(|(b, a)| (super::config::bitstring(b as u64, self.n_sites), *a))
            .collect()
    }

    /// Tensor product `|self⟩ ⊗ |other⟩` with `other` occupying the higher sites.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let n = self.n_sites + other.n_sites;
        check_dense(n)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        for (hi, b) in other.amps.iter().enumerate() {
            if *b == C64::new(0.0, 0.0) {
                continue;
            }
            for (lo, a) in self.amps.iter().enumerate() {
                amps[(hi << self.n_sites) | lo] = a * b;
            }
        }
        Ok(Self { n_sites: n, amps })
    }

    /// Product state with site `j` in `α_j|0⟩ + β_j|1⟩`.
    pub fn product(sites: &[(C64, C64)]) -> Result<Self> {
        let n = sites.len();
        check_dense(n)?;
        let mut amps = vec![C64::new(1.0, 0.0); 1 << n];
        for (b, amp) in amps.iter_mut().enumerate() {
            for (j, (down, up)) in sites.iter().enumerate() {
                *amp *= if b >> j & 1 == 1 { *up } else { *down };
            }
        }
        Ok(Self { n_sites: n, amps })
    }
}

/// Relative drop tolerance applied by [`SparseState::prune`].
pub const SPARSE_DROP_TOL: f64 = 1e-14;

/// Sparse state keyed by configuration bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseState {
    n_sites: usize,
    terms: BTreeMap<u64, C64>,
}

impl SparseState {
    pub fn new(n_sites: usize) -> Result<Self> {
        SpinConfig::new(0, n_sites)?;
        Ok(Self {
            n_sites,
            terms: BTreeMap::new(),
        })
    }

    pub fn basis(config: SpinConfig) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(config.bits(), C64::new(1.0, 0.0));
        Self {
            n_sites: config.n_sites(),
            terms,
        }
    }

    pub fn all_up(n_sites: usize) -> Result<Self> {
        Ok(Self::basis(SpinConfig::all_up(n_sites)?))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, C64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn get(&self, bits: u64) -> C64 {
        self.terms.get(&bits).copied().unwrap_or_default()
    }

    pub fn add(&mut self, bits: u64, amp: C64) -> Result<()> {
        if bits & !full_mask(self.n_sites) != 0 {
            return Err(Error::invalid("configuration outside the chain"));
        }
        *self.terms.entry(bits).or_default() += amp;
        Ok(())
    }

    pub(crate) fn add_unchecked(&mut self, bits: u64, amp: C64) {
        *self.terms.entry(bits).or_default() += amp;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Removes amplitudes below `SPARSE_DROP_TOL` times the largest magnitude.
    pub fn prune(&mut self) {
        let max = self.terms.values().map(|a| a.norm()).fold(0.0, f64::max);
        let cut = max * SPARSE_DROP_TOL;
        self.terms.retain(|_, a| a.norm() > cut);
    }

    pub fn to_dense(&self) -> Result<PureState> {
        let mut s = PureState::zeros(self.n_sites)?;
        for (b, a) in &self.terms {
            s.amps[*b as usize] = *a;
        }
        Ok(s)
    }

    pub fn from_dense(state: &PureState) -> Self {
        let mut out = Self {
            n_sites: state.n_sites,
            terms: BTreeMap::new(),
        };
        for (b, a) in state.amps.iter().enumerate() {
            if *a != C64::new(0.0, 0.0) {
                out.terms.insert(b as u64, *a);
            }
        }
        out.prune();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_ceiling_is_enforced() {
        assert!(matches!(PureState::zeros(25), Err(Error::Resource(_))));
        assert!(PureState::zeros(3).is_ok());
    }

    #[test]
    fn product_state_matches_kron() {
        let a = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let b = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let p = PureState::product(&[a, b]).unwrap();
        let pa = PureState::product(&[a]).unwrap();
        let pb = PureState::product(&[b]).unwrap();
        assert_eq!(p, pa.kron(&pb).unwrap());
        assert!(p.is_normalized());
    }

    #[test]
    fn sparse_prune_drops_tiny_terms() {
        let mut s = SparseState::new(3).unwrap();
        s.add(1, C64::new(1.0, 0.0)).unwrap();
        s.add(2, C64::new(1e-16, 0.0)).unwrap();
        s.prune();
        assert_eq!(s.len(), 1);
        assert!(s.add(8, C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn from_terms_reads_bitstrings() {
        let s = PureState::from_terms(&[("10", 1.0), ("01", -1.0)]).unwrap();
        assert_eq!(s.amplitudes()[1], C64::new(1.0, 0.0));
        assert_eq!(s.amplitudes()[2], C64::new(-1.0, 0.0));
    }
}
