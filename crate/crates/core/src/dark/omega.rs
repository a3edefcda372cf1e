use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;

use super::bitstrings::is_independent_set;
use super::kernel::is_dark;
use crate::error::{Error, Result};
use crate::linalg::nullspace;
use crate::spin::{bitstring, combinations, Boundary, ConstraintRule, PureState, C64};

/// Seed `t_m = 1^m 0 1 0^{m-1}` as a bitmask (site 1 = bit 0).
pub fn omega_seed(m: usize) -> u64 {
    let ones = (1u64 << m) - 1;
    ones | 1u64 << (m + 1)
}

/// Children of `bits` under `F` on an open window whose first site never emits.
fn open_children(bits: u64, len: usize) -> impl Iterator<Item = u64> {
    (1..len).filter_map(move |j| (bits >> j & 1 == 1 && bits >> (j - 1) & 1 == 1).then_some(bits ^ 1 << j))
}

fn max_run(bits: u64) -> usize {
    let mut best = 0;
    let mut b = bits;
    while b != 0 {
        b >>= b.trailing_zeros();
        let run = b.trailing_ones() as usize;
        best = best.max(run);
        b = b.checked_shr(run as u32).unwrap_or(0);
    }
    best
}

/// Cancellation closure of the seed `t_m` inside a window of `len` sites and the
/// kernel of `F` restricted to its span (columns, in the closure basis).
pub struct OmegaClosure {
    pub m: usize,
    pub len: usize,
    pub configs: Vec<u64>,
    pub kernel: DMatrix<f64>,
}

impl OmegaClosure {
    pub fn new(m: usize, len: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("packets start at m = 2"));
        }
        if len < 2 * m + 1 || len > 30 {
            return Err(Error::invalid(format!(
                "window length {len} must lie in {}..=30",
                2 * m + 1
            )));
        }
        let seed = omega_seed(m);
        let k = seed.count_ones() as usize;
        let candidates: Vec<u64> = combinations(len, k)
            .into_iter()
            .filter(|&c| max_run(c) <= m)
            .collect();
        let mut parents: BTreeSet<u64> = BTreeSet::from([seed]);
        loop {
            let children: BTreeSet<u64> = parents
                .iter()
                .flat_map(|&p| open_children(p, len))
                .collect();
            let before = parents.len();
            for &c in &candidates {
                if open_children(c, len).any(|x| children.contains(&x)) {
                    parents.insert(c);
                }
            }
            if parents.len() == before {
                break;
            }
        }
        let configs: Vec<u64> = parents.into_iter().collect();
        let children: Vec<u64> = configs
            .iter()
            .flat_map(|&p| open_children(p, len))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut f = DMatrix::zeros(children.len(), configs.len());
        for (c, &p) in configs.iter().enumerate() {
            for x in open_children(p, len) {
                let r = children.binary_search(&x).expect("child listed");
                f[(r, c)] += 1.0;
            }
        }
        let kernel = nullspace(&f);
        Ok(Self {
            m,
            len,
            configs,
            kernel,
        })
    }

    fn seed_row(&self) -> usize {
        self.configs
            .binary_search(&omega_seed(self.m))
            .expect("seed in closure")
    }

    /// Minimum-norm kernel vector with unit coefficient on the seed.
    pub fn pinned(&self) -> Result<DVector<f64>> {
        let a = self.kernel.row(self.seed_row()).transpose();
        let w = a.norm_squared();
        if w < 1e-20 {
            return Err(Error::numeric(format!(
                "no dark vector of the m = {} closure contains the seed",
                self.m
            )));
        }
        let mut v = &self.kernel * a / w;
        for x in v.iter_mut() {
            let r = x.round();
            if (*x - r).abs() < 1e-12 {
                *x = r;
            }
        }
        Ok(v)
    }

    fn to_state(&self, v: &DVector<f64>) -> Result<PureState> {
        let mut psi = PureState::zeros(self.len)?;
        for (i, &b) in self.configs.iter().enumerate() {
            psi.amplitudes_mut()[b as usize] = C64::new(v[i], 0.0);
        }
        Ok(psi)
    }

    /// Window-local terms `(bitmask, coefficient)` of a closure-basis vector.
    pub fn terms(&self, v: &DVector<f64>) -> Vec<(u64, f64)> {
        self.configs
            .iter()
            .zip(v.iter())
            .filter(|(_, c)| c.abs() > 1e-14)
            .map(|(&b, &c)| (b, c))
            .collect()
    }
}

fn check_window_dark(psi: PureState) -> Result<PureState> {
    let c = is_dark(&ConstraintRule::east(Boundary::Open), &psi, 1e-10)?;
    if !c.dark {
        return Err(Error::numeric(format!(
            "packet residual {:e} exceeds tolerance",
            c.residual
        )));
    }
    Ok(psi)
}

/// Packet `Ω_m` on an open window of `len` sites: the seed-pinned minimum-norm
/// dark vector of the cancellation closure of `t_m`.
pub fn build_omega(m: usize, len: usize) -> Result<PureState> {
    let closure = OmegaClosure::new(m, len)?;
    let v = closure.pinned()?;
    check_window_dark(closure.to_state(&v)?)
}

/// Every dark vector of the `t_m` closure, as an orthonormal family.
pub fn omega_family(m: usize, len: usize) -> Result<Vec<PureState>> {
    let closure = OmegaClosure::new(m, len)?;
    (0..closure.kernel.ncols())
        .map(|c| check_window_dark(closure.to_state(&closure.kernel.column(c).into_owned())?))
        .collect()
}

/// Human-readable `±c|bits⟩` listing of the nonzero terms of `psi`.
pub fn format_terms(psi: &PureState) -> String {
    psi.amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 1e-12)
        .map(|(b, a)| format!("{:+}|{}>", a.re, bitstring(b as u64, psi.n_sites())))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Placement of a window-local packet inside a longer chain.
///
/// The window occupies sites `offset+1 ..= offset+len` (1-based, taken modulo `N`
/// on rings). The sites just before and after the window must be empty and the
/// remaining sites carry an independent-set background, so `F` acts on the window
/// exactly as the open-window operator does.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub offset: usize,
    pub background: u64,
}

fn rotate_in(bits: u64, len: usize, offset: usize, n: usize) -> u64 {
    (0..len)
        .filter(|j| bits >> j & 1 == 1)
        .map(|j| 1u64 << ((offset + j) % n))
        .fold(0, |a, b| a | b)
}

/// All valid placements of a `len`-site window in an `n`-site chain.
///
/// On rings, placements that wrap past site `N` are included; `F` is
/// translation invariant there.
pub fn embeddings(len: usize, n: usize, boundary: Boundary) -> Vec<Embedding> {
    let mut out = Vec::new();
    if len > n {
        return out;
    }
    let offsets: Vec<usize> = match boundary {
        Boundary::Periodic if n > len => (0..n).collect(),
        Boundary::Periodic => Vec::new(),
        Boundary::Open => (0..=n - len).collect(),
    };
    for offset in offsets {
        let window = rotate_in((1u64 << len) - 1, len, offset, n);
        let mut buffer = 0u64;
        match boundary {
            Boundary::Periodic => {
                buffer |= 1u64 << ((offset + n - 1) % n);
                buffer |= 1u64 << ((offset + len) % n);
            }
            Boundary::Open => {
                if offset > 0 {
                    buffer |= 1u64 << (offset - 1);
                }
                if offset + len < n {
                    buffer |= 1u64 << (offset + len);
                }
            }
        }
        let free: Vec<usize> = (0..n)
            .filter(|j| (window | buffer) >> j & 1 == 0)
            .collect();
        for sub in 0u64..1 << free.len() {
            let bg = free
                .iter()
                .enumerate()
                .filter(|(i, _)| sub >> i & 1 == 1)
                .map(|(_, &j)| 1u64 << j)
                .fold(0, |a, b| a | b);
            if is_independent_set(bg, n, boundary) {
                out.push(Embedding {
                    offset,
                    background: bg,
                });
            }
        }
    }
    out
}

/// Embeds window-local terms into an `n`-site state.
pub fn embed(terms: &[(u64, f64)], len: usize, n: usize, e: &Embedding) -> Result<PureState> {
    let mut psi = PureState::zeros(n)?;
    for &(b, c) in terms {
        let bits = rotate_in(b, len, e.offset, n) | e.background;
        psi.amplitudes_mut()[bits as usize] += C64::new(c, 0.0);
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        assert_eq!(bitstring(omega_seed(2), 5), "11010");
        assert_eq!(bitstring(omega_seed(3), 7), "1110100");
        assert_eq!(bitstring(omega_seed(4), 9), "111101000");
    }

    #[test]
    fn omega_two_and_three() {
        let o2 = build_omega(2, 5).unwrap();
        assert_eq!(
            o2,
            PureState::from_terms(&[("11010", 1.0), ("10011", -1.0)]).unwrap()
        );
        let o3 = build_omega(3, 7).unwrap();
        let want = PureState::from_terms(&[
            ("1110100", 1.0),
            ("1000111", 1.0),
            ("1100101", -1.0),
            ("1010110", -1.0),
            ("1100110", -1.0),
        ])
        .unwrap();
        assert_eq!(o3, want);
    }

    #[test]
    fn omega_four_is_dark_with_run_four() {
        let o4 = build_omega(4, 9).unwrap();
        assert!(o4.amp(crate::spin::SpinConfig::from_bitstring("111101000").unwrap()).re == 1.0);
        let runs: Vec<usize> = o4
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 1e-12)
            .map(|(b, _)| max_run(b as u64))
            .collect();
        assert_eq!(runs.iter().max(), Some(&4));
    }

    #[test]
    fn run_lengths() {
        assert_eq!(max_run(0b1110111), 3);
        assert_eq!(max_run(0), 0);
        assert_eq!(max_run(0b1010), 1);
    }

    #[test]
    fn embedded_packets_stay_dark() {
        let c = OmegaClosure::new(2, 5).unwrap();
        let terms = c.terms(&c.pinned().unwrap());
        for boundary in [Boundary::Periodic, Boundary::Open] {
            let rule = ConstraintRule::east(boundary);
            let es = embeddings(5, 8, boundary);
            assert!(!es.is_empty());
            for e in &es {
                let psi = embed(&terms, 5, 8, e).unwrap();
                assert!(is_dark(&rule, &psi, 1e-12).unwrap().dark);
            }
        }
    }
}
