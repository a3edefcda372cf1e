//! Discrete truncated Wigner sampling of constrained spins coupled to a lossy
//! cavity mode.
//!
//! Spins carry classical components `s^x, s^y, s^z`; the drift is written with
//! `s^± = (s^x ± i s^y)/2` so that `s⁺s⁻ = n(1 − n)` holds on the sampled
//! `s^{x,y} = ±1`, `s^z = 1` initial points. The cavity amplitude receives
//! additive complex noise from the Wigner representation of photon loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::dynamics::{Series, TimeGrid, TrajectoryResult};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::spin::{Boundary, ConstraintRule, Observable, RuleKind, C64};

/// Photon-number column name.
pub const PHOTONS: &str = "photons";

/// Components above this magnitude count as a blown-up integration.
const BLOWUP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct DtwaParams {
    pub n_sites: usize,
    /// Projector `P_j = c + α n_{j-1} + β n_{j+1} + γ n_{j-1} n_{j+1}`:
    /// `offset` is `c`, `coefficients` is `(α, β, γ)`.
    pub offset: f64,
    pub coefficients: (f64, f64, f64),
    pub boundary: Boundary,
    pub g: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Coherent cavity amplitude at `t = 0`.
    pub alpha0: C64,
    /// Requested step; `None` selects `0.002 / max(κ, gN)`.
    pub dt: Option<f64>,
    pub n_traj: usize,
    pub seed: u64,
    pub grid: TimeGrid,
}

impl DtwaParams {
    /// Parameters for the unconstrained rule or a nearest-neighbour rule with
    /// a projector expansion.
    pub fn for_rule(rule: &ConstraintRule, n_sites: usize, g: f64, kappa: f64, grid: TimeGrid) -> Result<Self> {
        let (offset, coefficients) = match rule.kind() {
            RuleKind::Dicke => (1.0, (0.0, 0.0, 0.0)),
            _ => (
                0.0,
                rule.projector_coefficients().ok_or_else(|| {
                    Error::invalid("rule has no (alpha, beta, gamma) projector expansion")
                })?,
            ),
        };
        Ok(Self {
            n_sites,
            offset,
            coefficients,
            boundary: rule.boundary(),
            g,
            kappa,
            delta: 0.0,
            alpha0: C64::new(0.0, 0.0),
            dt: None,
            n_traj: 1000,
            seed: 0,
            grid,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::invalid("n_sites must be positive"));
        }
        if !(self.kappa >= 0.0) || !self.g.is_finite() || !self.delta.is_finite() {
            return Err(Error::invalid("kappa must be >= 0 and g, delta finite"));
        }
        if self.n_traj < 2 {
            return Err(Error::invalid("n_traj must be at least 2"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::invalid(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn default_dt(&self) -> f64 {
        let scale = self.kappa.max(self.g.abs() * self.n_sites as f64);
        if scale > 0.0 {
            0.002 / scale
        } else {
            self.grid.step()
        }
    }

    /// Dyadic refinement level per grid interval and the resulting step.
    fn levels(&self) -> (u32, f64) {
        let want = self.dt.unwrap_or_else(|| self.default_dt());
        let span = self.grid.step();
        let level = (span / want).log2().ceil().max(0.0) as u32;
        (level, span / (1u64 << level) as f64)
    }

    /// Integration step actually used (the requested one rounded down to a
    /// power-of-two fraction of the grid spacing).
    pub fn effective_dt(&self) -> f64 {
        self.levels().1
    }
}

/// One phase-space sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub a: C64,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
}

impl PhasePoint {
    fn is_finite(&self) -> bool {
        let ok = |x: f64| x.is_finite() && x.abs() < BLOWUP;
        ok(self.a.re)
            && ok(self.a.im)
            && self.sx.iter().chain(&self.sy).chain(&self.sz).all(|&x| ok(x))
    }
}

/// Initial sample for trajectory `index`: `s^{x,y} = ±1` equiprobable,
/// `s^z = 1`, `a = α₀ + (η_R + iη_I)/2`.
pub fn sample_initial(params: &DtwaParams, index: u64) -> PhasePoint {
    sample_from(params, &mut substream(params.seed, index))
}

fn sample_from(params: &DtwaParams, rng: &mut ChaCha8Rng) -> PhasePoint {
    let n = params.n_sites;
    let mut sign = || if rng.random::<bool>() { 1.0 } else { -1.0 };
    let sx: Vec<f64> = (0..n).map(|_| sign()).collect();
    let sy: Vec<f64> = (0..n).map(|_| sign()).collect();
    let er: f64 = rng.sample(StandardNormal);
    let ei: f64 = rng.sample(StandardNormal);
    PhasePoint {
        a: params.alpha0 + C64::new(er, ei) * 0.5,
        sx,
        sy,
        sz: vec![1.0; n],
    }
}

struct Drift {
    da: C64,
    dsm: Vec<C64>,
    dsz: Vec<f64>,
}

struct Neighbours {
    n: usize,
    periodic: bool,
}

impl Neighbours {
    fn at(&self, j: usize, offset: isize) -> Option<usize> {
        let k = j as isize + offset;
        if self.periodic {
            Some(k.rem_euclid(self.n as isize) as usize)
        } else if k >= 0 && (k as usize) < self.n {
            Some(k as usize)
        } else {
            None
        }
    }
}

fn drift(params: &DtwaParams, a: C64, sm: &[C64], sz: &[f64]) -> Drift {
    let n = sm.len();
    let (al, be, ga) = params.coefficients;
    let g = params.g;
    let nb = Neighbours {
        n,
        periodic: params.boundary == Boundary::Periodic,
    };
    let occ: Vec<f64> = sz.iter().map(|z| 0.5 * (1.0 + z)).collect();
    let o = |j: usize, d: isize| nb.at(j, d).map_or(0.0, |k| occ[k]);
    let sp = |j: usize, d: isize| nb.at(j, d).map_or(C64::new(0.0, 0.0), |k| sm[k].conj());
    let p: Vec<f64> = (0..n)
        .map(|j| {
            let (l, r) = (o(j, -1), o(j, 1));
            params.offset + al * l + be * r + ga * l * r
        })
        .collect();
    let i = C64::new(0.0, 1.0);
    let coll: C64 = (0..n).map(|j| sm[j] * p[j]).sum();
    let da = -i * params.delta * a - i * g * coll - 0.5 * params.kappa * a;
    let mut dsm = Vec::with_capacity(n);
    let mut dsz = Vec::with_capacity(n);
    for j in 0..n {
        let x = al * a * sp(j, 1)
            + be * a * sp(j, -1)
            + ga * a * (sp(j, 1) * o(j, 2) + o(j, -2) * sp(j, -1));
        let x = x + x.conj();
        dsm.push(i * g * a * p[j] * sz[j] - i * g * sm[j] * x);
        let sp_j = sm[j].conj();
        dsz.push((-2.0 * i * g * p[j] * (a * sp_j - a.conj() * sm[j])).re);
    }
    Drift { da, dsm, dsz }
}

/// One Heun step of the drift followed by the additive cavity noise
/// `a += −½√κ (dW_R + i dW_I)` with Wiener increments of variance `dt`.
pub fn step(point: &PhasePoint, params: &DtwaParams, dt: f64, dw: (f64, f64)) -> PhasePoint {
    let n = point.sx.len();
    let sm: Vec<C64> = (0..n).map(|j| C64::new(point.sx[j], -point.sy[j]) * 0.5).collect();
    let d1 = drift(params, point.a, &sm, &point.sz);
    let a1 = point.a + d1.da * dt;
    let sm1: Vec<C64> = (0..n).map(|j| sm[j] + d1.dsm[j] * dt).collect();
    let sz1: Vec<f64> = (0..n).map(|j| point.sz[j] + d1.dsz[j] * dt).collect();
    let d2 = drift(params, a1, &sm1, &sz1);
    let h = 0.5 * dt;
    let a = point.a + (d1.da + d2.da) * h - 0.5 * params.kappa.sqrt() * C64::new(dw.0, dw.1);
    let mut out = PhasePoint {
        a,
        sx: Vec::with_capacity(n),
        sy: Vec::with_capacity(n),
        sz: Vec::with_capacity(n),
    };
    for j in 0..n {
        let s = sm[j] + (d1.dsm[j] + d2.dsm[j]) * h;
        out.sx.push(2.0 * s.re);
        out.sy.push(-2.0 * s.im);
        out.sz.push(point.sz[j] + (d1.dsz[j] + d2.dsz[j]) * h);
    }
    out
}

/// Brownian path on `2^level` equal sub-steps of a grid interval of length
/// `span`, built by midpoint bisection so coarser levels reuse a prefix of the
/// same draws. Returns the increments.
fn bridge_increments(rng: &mut ChaCha8Rng, span: f64, level: u32) -> Vec<f64> {
    let m = 1usize << level;
    let mut w = vec![0.0; m + 1];
    let z: f64 = rng.sample(StandardNormal);
    w[m] = span.sqrt() * z;
    let mut width = m;
    while width > 1 {
        let half = width / 2;
        let h = span * width as f64 / m as f64;
        for left in (0..m).step_by(width) {
            let z: f64 = rng.sample(StandardNormal);
            w[left + half] = 0.5 * (w[left] + w[left + width]) + 0.5 * h.sqrt() * z;
        }
        width = half;
    }
    w.windows(2).map(|p| p[1] - p[0]).collect()
}

fn noise_stream(seed: u64, traj: u64, interval: u64, part: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD7A5_0000_0000_0000);
    rng.set_stream(traj.wrapping_mul(1 << 24) ^ (interval << 1) ^ part);
    rng
}

fn observe(obs: Observable, params: &DtwaParams, p: &PhasePoint) -> f64 {
    let n = p.sz.len();
    let occ: Vec<f64> = p.sz.iter().map(|z| 0.5 * (1.0 + z)).collect();
    let block = |ell: usize| -> f64 {
        let starts = match params.boundary {
            Boundary::Periodic => n,
            Boundary::Open => (n + 1).saturating_sub(ell),
        };
        (0..starts)
            .map(|j| (0..ell).map(|m| occ[(j + m) % n]).product::<f64>())
            .sum()
    };
    match obs {
        Observable::Density => occ.iter().sum::<f64>() / n as f64,
        Observable::Sz => 0.5 * p.sz.iter().sum::<f64>(),
        Observable::Sperp2 => {
            let x: f64 = p.sx.iter().sum();
            let y: f64 = p.sy.iter().sum();
            0.25 * (x * x + y * y)
        }
        Observable::Nadj => block(2),
        Observable::Ntri => block(3),
        Observable::Nell(l) => block(l),
        Observable::FdagF => unreachable!("rejected before sampling"),
    }
}

struct DtwaOutcome {
    values: Vec<Vec<f64>>,
    photons: Vec<f64>,
}

fn run_trajectory(params: &DtwaParams, observables: &[Observable], index: u64, level: u32) -> std::result::Result<DtwaOutcome, f64> {
    let grid = &params.grid;
    let span = grid.step();
    let dt = span / (1u64 << level) as f64;
    let mut point = sample_initial(params, index);
    let mut out = DtwaOutcome {
        values: vec![Vec::with_capacity(grid.n_points); observables.len()],
        photons: Vec::with_capacity(grid.n_points),
    };
    let record = |p: &PhasePoint, out: &mut DtwaOutcome| {
        for (o, obs) in observables.iter().enumerate() {
            out.values[o].push(observe(*obs, params, p));
        }
        out.photons.push(p.a.norm_sqr() - 0.5);
    };
    record(&point, &mut out);
    for interval in 1..grid.n_points {
        let (wr, wi) = if params.kappa > 0.0 {
            (
                bridge_increments(&mut noise_stream(params.seed, index, interval as u64, 0), span, level),
                bridge_increments(&mut noise_stream(params.seed, index, interval as u64, 1), span, level),
            )
        } else {
            let z = vec![0.0; 1 << level];
            (z.clone(), z)
        };
        for s in 0..wr.len() {
            point = step(&point, params, dt, (wr[s], wi[s]));
        }
        if !point.is_finite() {
            return Err(grid.time(interval));
        }
        record(&point, &mut out);
    }
    Ok(out)
}

/// Trajectory-averaged DTWA observables with symmetric-ordering corrections:
/// photons `⟨|a|²⟩ − ½`, spin moments from phase-space averages.
pub fn run_dtwa(params: &DtwaParams, observables: &[Observable]) -> Result<TrajectoryResult> {
    params.validate()?;
    if observables.contains(&Observable::FdagF) {
        return Err(Error::invalid("FdagF is not available from DTWA samples"));
    }
    let (level, _) = params.levels();
    if level > 24 {
        return Err(Error::resource("dt too small relative to the grid spacing"));
    }
    let outcomes: Vec<std::result::Result<DtwaOutcome, f64>> = (0..params.n_traj)
        .into_par_iter()
        .map(|i| run_trajectory(params, observables, i as u64, level))
        .collect();
    if let Some((i, t)) = outcomes
        .iter()
        .enumerate()
        .find_map(|(i, o)| o.as_ref().err().map(|t| (i, *t)))
    {
        let stable = (1..=8)
            .map(|k| level + k)
            .find(|&l| run_trajectory(params, observables, i as u64, l).is_ok())
            .map(|l| params.grid.step() / (1u64 << l) as f64);
        return Err(Error::numeric(match stable {
            Some(dt) => format!(
                "DTWA trajectory {i} diverged by t = {t} at dt = {}; largest stable pilot dt = {dt:e}",
                params.effective_dt()
            ),
            None => format!("DTWA trajectory {i} diverged by t = {t}; no stable pilot dt found"),
        }));
    }
    let outcomes: Vec<DtwaOutcome> = outcomes.into_iter().map(|o| o.expect("checked")).collect();
    let n_points = params.grid.n_points;
    let mut table = BTreeMap::new();
    for (o, obs) in observables.iter().enumerate() {
        let rows: Vec<Vec<f64>> = outcomes.iter().map(|x| x.values[o].clone()).collect();
        table.insert(obs.to_string(), Series::from_samples(&rows, n_points));
    }
    let rows: Vec<Vec<f64>> = outcomes.iter().map(|x| x.photons.clone()).collect();
    table.insert(PHOTONS.to_string(), Series::from_samples(&rows, n_points));
    Ok(TrajectoryResult {
        grid: params.grid,
        observables: table,
        n_traj: params.n_traj,
        master_seed: params.seed,
        snapshot_indices: Vec::new(),
        snapshots: Vec::new(),
        jumps: 0,
    })
}
