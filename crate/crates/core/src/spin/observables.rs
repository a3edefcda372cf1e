use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::ops::{f_into, lower_into, raise_into};
use super::rule::{Boundary, ConstraintRule};
use super::state::{PureState, C64};
use crate::error::Error;

/// Scalar observables evaluated on spin states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    /// Mean excitation density `(1/N) Σ n_j`.
    Density,
    /// `S^z = ½ Σ σ_j^z`.
    Sz,
    /// `⟨S⁺S⁻ + S⁻S⁺⟩ / 2 = ⟨S_x² + S_y²⟩`.
    Sperp2,
    /// Adjacent-pair number `Σ n_j n_{j+1}`.
    Nadj,
    /// Adjacent-triple number `Σ n_j n_{j+1} n_{j+2}`.
    Ntri,
    /// Block correlator `Σ_j n_j ⋯ n_{j+ℓ-1}`.
    Nell(usize),
    /// Emission rate per unit `Γ`, `⟨F†F⟩`.
    FdagF,
}

impl Observable {
    /// Diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        !matches!(self, Observable::Sperp2 | Observable::FdagF)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Density => write!(f, "n"),
            Observable::Sz => write!(f, "Sz"),
            Observable::Sperp2 => write!(f, "Sperp2"),
            Observable::Nadj => write!(f, "Nadj"),
            Observable::Ntri => write!(f, "Ntri"),
            Observable::Nell(l) => write!(f, "N{l}"),
            Observable::FdagF => write!(f, "FdagF"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "n" => Observable::Density,
            "Sz" => Observable::Sz,
            "Sperp2" => Observable::Sperp2,
            "Nadj" => Observable::Nadj,
            "Ntri" => Observable::Ntri,
            "FdagF" => Observable::FdagF,
            _ => {
                let l = s
                    .strip_prefix('N')
                    .and_then(|r| r.parse::<usize>().ok())
                    .filter(|&l| l >= 1)
                    .ok_or_else(|| Error::invalid(format!("unknown observable {s:?}")))?;
                Observable::Nell(l)
            }
        })
    }
}

/// Number of excited blocks of length `ell` in `bits`.
///
/// Periodic chains sum over all `N` starting sites with wrap-around; open
/// chains over the `N - ell + 1` blocks inside the chain.
pub fn block_count(bits: u64, n: usize, ell: usize, boundary: Boundary) -> usize {
    if ell == 0 {
        return 0;
    }
    // Bit j of `acc` is set when sites j..j+ell-1 are all excited.
    let mut acc = bits;
    match boundary {
        Boundary::Periodic => {
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            let b = bits & mask;
            for m in 1..ell {
                let s = (m % n) as u32;
                let rot = if s == 0 { b } else { (b >> s | b << (n as u32 - s)) & mask };
                acc &= rot;
            }
            (acc & mask).count_ones() as usize
        }
        Boundary::Open => {
            if ell > n {
                return 0;
            }
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            acc &= mask;
            for m in 1..ell {
                acc &= bits >> m;
            }
            acc.count_ones() as usize
        }
    }
}

/// Value of a diagonal observable on a basis state; `None` for off-diagonal ones.
pub fn diagonal_value(obs: Observable, bits: u64, n: usize, boundary: Boundary) -> Option<f64> {
    let k = bits.count_ones() as f64;
    match obs {
        Observable::Density => Some(k / n as f64),
        Observable::Sz => Some(k - n as f64 / 2.0),
        Observable::Nadj => Some(block_count(bits, n, 2, boundary) as f64),
        Observable::Ntri => Some(block_count(bits, n, 3, boundary) as f64),
        Observable::Nell(l) => Some(block_count(bits, n, l, boundary) as f64),
        Observable::Sperp2 | Observable::FdagF => None,
    }
}

/// Expectation value together with the squared norm it was divided by.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub norm_sqr: f64,
}

impl Expectation {
    pub fn was_normalized(&self) -> bool {
        (self.norm_sqr - 1.0).abs() < 1e-12
    }
}

/// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩`, reporting the norm so callers can flag unnormalised input.
pub fn expect_report(obs: Observable, rule: &ConstraintRule, psi: &PureState) -> Expectation {
    let n = psi.n_sites();
    let amps = psi.amplitudes();
    let norm_sqr = psi.norm_sqr();
    let raw = match obs {
        Observable::FdagF => {
            let mut out = vec![C64::new(0.0, 0.0); amps.len()];
            f_into(&rule.compile(n), amps, &mut out);
            out.iter().map(|a| a.norm_sqr()).sum()
        }
        Observable::Sperp2 => {
            let mut lo = vec![C64::new(0.0, 0.0); amps.len()];
            let mut hi = vec![C64::new(0.0, 0.0); amps.len()];
            lower_into(n, amps, &mut lo);
            raise_into(n, amps, &mut hi);
            let a: f64 = lo.iter().map(|a| a.norm_sqr()).sum();
            let b: f64 = hi.iter().map(|a| a.norm_sqr()).sum();
            0.5 * (a + b)
        }
        _ => amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.re != 0.0 || a.im != 0.0)
            .map(|(b, a)| {
                a.norm_sqr()
                    * diagonal_value(obs, b as u64, n, rule.boundary()).expect("diagonal")
            })
            .sum(),
    };
    Expectation {
        value: raw / norm_sqr,
        norm_sqr,
    }
}

/// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn expect(obs: Observable, rule: &ConstraintRule, psi: &PureState) -> f64 {
    expect_report(obs, rule, psi).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::SpinConfig;

    fn basis(s: &str) -> PureState {
        PureState::basis(SpinConfig::from_bitstring(s).unwrap()).unwrap()
    }

    #[test]
    fn fully_up_emission_rate_is_n() {
        for r in [
            ConstraintRule::dicke(Boundary::Periodic),
            ConstraintRule::east(Boundary::Periodic),
            ConstraintRule::and(Boundary::Periodic),
            ConstraintRule::or(Boundary::Periodic),
        ] {
            assert_eq!(expect(Observable::FdagF, &r, &basis("111111")), 6.0);
        }
    }

    #[test]
    fn alternating_east_is_dark() {
        let r = ConstraintRule::east(Boundary::Periodic);
        assert_eq!(expect(Observable::FdagF, &r, &basis("1010")), 0.0);
    }

    #[test]
    fn fully_up_transverse_coherence() {
        let r = ConstraintRule::dicke(Boundary::Periodic);
        assert_eq!(expect(Observable::Sperp2, &r, &basis("11111")), 2.5);
    }

    #[test]
    fn open_chain_block_counts() {
        let r = ConstraintRule::east(Boundary::Open);
        let psi = basis("11010");
        assert_eq!(expect(Observable::Nadj, &r, &psi), 1.0);
        assert_eq!(expect(Observable::Ntri, &r, &psi), 0.0);
        assert_eq!(expect(Observable::Nell(1), &r, &psi), 3.0);
        let p = ConstraintRule::east(Boundary::Periodic);
        assert_eq!(expect(Observable::Nadj, &p, &basis("10011")), 2.0);
    }

    #[test]
    fn block_count_matches_site_loop() {
        for n in 1..=7usize {
            for bits in 0..1u64 << n {
                for ell in 1..=n + 2 {
                    let periodic = (0..n)
                        .filter(|&j| (0..ell).all(|m| bits >> ((j + m) % n) & 1 == 1))
                        .count();
                    let open = (0..(n + 1).saturating_sub(ell))
                        .filter(|&j| (0..ell).all(|m| bits >> (j + m) & 1 == 1))
                        .count();
                    assert_eq!(block_count(bits, n, ell, Boundary::Periodic), periodic, "{bits:b} {ell}");
                    assert_eq!(block_count(bits, n, ell, Boundary::Open), open, "{bits:b} {ell}");
                }
            }
        }
    }

    #[test]
    fn unnormalised_input_is_reported() {
        let r = ConstraintRule::east(Boundary::Open);
        let mut psi = basis("110");
        psi.scale(C64::new(2.0, 0.0));
        let e = expect_report(Observable::Density, &r, &psi);
        assert!(!e.was_normalized());
        assert!((e.value - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn observable_names_round_trip() {
        for o in [
            Observable::Density,
            Observable::Sz,
            Observable::Sperp2,
            Observable::Nadj,
            Observable::Ntri,
            Observable::Nell(4),
            Observable::FdagF,
        ] {
            assert_eq!(o.to_string().parse::<Observable>().unwrap(), o);
        }
        assert!("bogus".parse::<Observable>().is_err());
    }
}
