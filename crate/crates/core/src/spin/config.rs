use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Largest chain length representable in a bitmask.
pub const MAX_SITES: usize = 63;

/// Computational-basis configuration of an `n_sites` chain.
///
/// Site `j` (1-based) is stored in bit `j - 1`. Printed bitstrings list site 1
/// first, so `"110"` means sites 1 and 2 are excited.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinConfig {
    bits: u64,
    n_sites: usize,
}

impl SpinConfig {
    pub fn new(bits: u64, n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::invalid(format!(
                "chain length {n_sites} outside 1..={MAX_SITES}"
            )));
        }
        if bits >> n_sites != 0 {
            return Err(Error::invalid(format!(
                "bitmask {bits:#x} does not fit in {n_sites} sites"
            )));
        }
        Ok(Self { bits, n_sites })
    }

    /// Parses a string of `0`/`1` characters, leftmost character = site 1.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        let mut bits = 0u64;
        let mut n = 0usize;
        for (i, ch) in s.trim().chars().enumerate() {
            match ch {
                '0' => {}
                '1' => bits |= 1u64 << i,
                _ => return Err(Error::invalid(format!("bad character {ch:?} in bitstring"))),
            }
            n += 1;
        }
        Self::new(bits, n)
    }

    pub fn all_up(n_sites: usize) -> Result<Self> {
        Self::new(full_mask(n_sites), n_sites)
    }

    pub fn all_down(n_sites: usize) -> Result<Self> {
        Self::new(0, n_sites)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Occupation of site `j` (1-based).
    pub fn occ(&self, j: usize) -> Result<bool> {
        if j == 0 || j > self.n_sites {
            return Err(Error::invalid(format!(
                "site {j} outside 1..={}",
                self.n_sites
            )));
        }
        Ok(self.bits >> (j - 1) & 1 == 1)
    }

    pub fn excitations(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Flips site `j` (1-based).
    pub fn flipped(&self, j: usize) -> Result<Self> {
        self.occ(j)?;
        Ok(Self {
            bits: self.bits ^ (1u64 << (j - 1)),
            n_sites: self.n_sites,
        })
    }

    pub fn to_bitstring(&self) -> String {
        bitstring(self.bits, self.n_sites)
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>", self.to_bitstring())
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Renders `bits` with site 1 leftmost.
pub fn bitstring(bits: u64, n: usize) -> String {
    (0..n)
        .map(|j| if bits >> j & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Inverse of [`bitstring`] without length checks beyond the character set.
pub fn parse_bits(s: &str) -> Result<u64> {
    SpinConfig::from_bitstring(s).map(|c| c.bits())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitstring_round_trip_uses_site_one_first() {
        let c = SpinConfig::from_bitstring("110").unwrap();
        assert_eq!(c.bits(), 0b011);
        assert!(c.occ(1).unwrap() && c.occ(2).unwrap() && !c.occ(3).unwrap());
        assert_eq!(c.to_bitstring(), "110");
        assert_eq!(c.to_string(), "|110>");
    }

    #[test]
    fn rejects_oversized_masks() {
        assert!(SpinConfig::new(0b1000, 3).is_err());
        assert!(SpinConfig::new(0, 0).is_err());
        assert!(SpinConfig::from_bitstring("10x").is_err());
    }

    #[test]
    fn flip_and_count() {
        let c = SpinConfig::all_up(5).unwrap();
        assert_eq!(c.excitations(), 5);
        let d = c.flipped(3).unwrap();
        assert_eq!(d.to_bitstring(), "11011");
        assert!(c.occ(6).is_err());
    }
}
