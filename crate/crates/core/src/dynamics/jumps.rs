use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

use super::model::{EffectiveModel, TimeGrid};
use super::result::{Record, Series, TrajectoryResult};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_sorted;
use crate::rng::substream;
use crate::spin::{
    expect, f_into, fdag_into, CompiledRule, Observable, PureState, Sector, C64,
    DENSE_MAX_SITES,
};

/// Largest chain for the sector-spectral propagator.
pub const SPECTRAL_MAX_SITES: usize = 12;

/// Relative time tolerance when locating a jump.
const JUMP_TIME_RTOL: f64 = 1e-9;

/// Rates below this count as zero when deciding whether a state is frozen.
const ZERO_RATE: f64 = 1e-12;

/// How the no-jump evolution is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    /// Spectral when the model and initial state allow it, otherwise RK4.
    #[default]
    Auto,
    /// Exact exponentials in the eigenbasis of `F†F`, sector by sector.
    /// Requires `V₂ = 0` and an initial state of fixed excitation number.
    Spectral,
    /// Fixed-step RK4 on the full space.
    Rk4,
}

#[derive(Clone, Debug, Default)]
pub struct JumpOptions {
    pub record: Record,
    pub engine: Engine,
    /// RK4 step; defaults to `0.01 / (rate scale · N)`.
    pub dt: Option<f64>,
}

impl JumpOptions {
    pub fn recording(record: Record) -> Self {
        Self {
            record,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Channel {
    Collective,
    Loss(usize),
    DephasingSite(usize),
    DephasingCommon,
}

struct Outcome {
    values: Vec<Vec<f64>>,
    snapshots: Vec<PureState>,
    jumps: usize,
}

struct Recorder<'a> {
    model: &'a EffectiveModel,
    observables: &'a [Observable],
    snapshot_at: &'a [usize],
    out: Outcome,
}

impl<'a> Recorder<'a> {
    fn new(model: &'a EffectiveModel, observables: &'a [Observable], snapshot_at: &'a [usize], n_points: usize) -> Self {
        Self {
            model,
            observables,
            snapshot_at,
            out: Outcome {
                values: vec![Vec::with_capacity(n_points); observables.len()],
                snapshots: Vec::with_capacity(snapshot_at.len()),
                jumps: 0,
            },
        }
    }

    fn record(&mut self, gi: usize, psi: &PureState) {
        for (o, obs) in self.observables.iter().enumerate() {
            self.out.values[o].push(expect(*obs, &self.model.rule, psi));
        }
        if self.snapshot_at.binary_search(&gi).is_ok() {
            self.out.snapshots.push(psi.clone());
        }
    }

    /// Repeats the last recorded row up to grid index `upto` (exclusive).
    fn repeat_last(&mut self, from: usize, upto: usize, psi: &PureState) {
        for gi in from..upto {
            for col in self.out.values.iter_mut() {
                let last = *col.last().expect("recorded before freezing");
                col.push(last);
            }
            if self.snapshot_at.binary_search(&gi).is_ok() {
                self.out.snapshots.push(psi.clone());
            }
        }
    }
}

/// Chooses a channel with probability proportional to `rates`, in declaration order.
fn pick_channel(rates: &[(Channel, f64)], rng: &mut ChaCha8Rng) -> Result<Channel> {
    let total: f64 = rates.iter().map(|r| r.1).sum();
    if !(total > 0.0) {
        return Err(Error::numeric("jump requested with zero total rate"));
    }
    let mut u = rng.random::<f64>() * total;
    for &(c, r) in rates {
        if u < r {
            return Ok(c);
        }
        u -= r;
    }
    Ok(rates.iter().rev().find(|r| r.1 > 0.0).expect("positive total").0)
}

pub(super) fn threshold(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

fn sz_of(bits: u64, n: usize) -> f64 {
    bits.count_ones() as f64 - n as f64 / 2.0
}

/// Site-local channel rates common to both engines, given site occupations.
fn local_rates(model: &EffectiveModel, n: usize, occupation: &[f64], sz2: f64, rates: &mut Vec<(Channel, f64)>) {
    if model.gamma_loss > 0.0 {
        for (j, &p) in occupation.iter().enumerate() {
            rates.push((Channel::Loss(j), model.gamma_loss * p));
        }
    }
    if model.gamma_deph_ind > 0.0 {
        for j in 0..n {
            rates.push((Channel::DephasingSite(j), model.gamma_deph_ind));
        }
    }
    if model.gamma_deph_common > 0.0 {
        rates.push((Channel::DephasingCommon, model.gamma_deph_common * sz2));
    }
}

struct SectorSpectrum {
    sector: Sector,
    evals: Vec<f64>,
    /// Columns are eigenvectors of `F†F` in the sector configuration basis.
    evecs: DMatrix<f64>,
    /// `F` from this sector into the next lower one, configuration bases.
    f_down: DMatrix<C64>,
}

/// Eigen-decompositions of `F†F` on the sectors reachable from `k_top`.
struct Spectral {
    n: usize,
    sectors: Vec<SectorSpectrum>,
}

impl Spectral {
    fn build(compiled: &CompiledRule, n: usize, k_top: usize) -> Self {
        let sectors = (0..=k_top)
            .map(|k| {
                let sector = Sector::new(n, k);
                let f = sector.f_matrix(compiled);
                let m = f.transpose() * &f;
                let (evals, evecs) = sym_eigen_sorted(m);
                SectorSpectrum {
                    evals: evals.into_iter().map(|x| x.max(0.0)).collect(),
                    evecs,
                    f_down: f.map(|x| C64::new(x, 0.0)),
                    sector,
                }
            })
            .collect();
        Self { n, sectors }
    }
}

struct SpectralState<'a> {
    spec: &'a Spectral,
    model: &'a EffectiveModel,
    k: usize,
    /// Eigenbasis coefficients, normalized at the last jump.
    coeffs: DVector<C64>,
    /// Per-component norm decay rates `Γλ_i + 2c_k`.
    decay: Vec<f64>,
}

impl<'a> SpectralState<'a> {
    fn new(spec: &'a Spectral, model: &'a EffectiveModel, k: usize, config: &DVector<C64>) -> Self {
        let mut s = Self {
            spec,
            model,
            k,
            coeffs: DVector::zeros(0),
            decay: Vec::new(),
        };
        s.reset(k, config);
        s
    }

    fn constant_decay(&self, k: usize) -> f64 {
        let m = self.model;
        let n = self.spec.n as f64;
        let sz = k as f64 - n / 2.0;
        m.gamma_loss * k as f64 + m.gamma_deph_ind * n + m.gamma_deph_common * sz * sz
    }

    /// Loads a configuration-basis vector of sector `k`, normalized.
    fn reset(&mut self, k: usize, config: &DVector<C64>) {
        let sec = &self.spec.sectors[k];
        let re = sec.evecs.tr_mul(&config.map(|z| z.re));
        let im = sec.evecs.tr_mul(&config.map(|z| z.im));
        let mut c = re.zip_map(&im, C64::new);
        let norm = c.norm();
        c /= C64::new(norm, 0.0);
        let base = self.constant_decay(k);
        self.decay = sec.evals.iter().map(|&l| self.model.gamma * l + base).collect();
        self.k = k;
        self.coeffs = c;
    }

    fn norm_sqr(&self, tau: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.decay)
            .map(|(c, &d)| c.norm_sqr() * (-d * tau).exp())
            .sum()
    }

    /// Norm that survives forever.
    fn asymptotic_norm_sqr(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.decay)
            .filter(|(_, &d)| d < ZERO_RATE)
            .map(|(c, _)| c.norm_sqr())
            .sum()
    }

    fn decaying_weight(&self, tau: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.decay)
            .filter(|(_, &d)| d >= ZERO_RATE)
            .map(|(c, &d)| c.norm_sqr() * (-d * tau).exp())
            .sum()
    }

    /// Unnormalized configuration-basis vector after evolving by `tau`.
    ///
    /// Decay rates ascend with the eigenvalues, so components damped below
    /// `1e-32` of the surviving norm form a suffix and are skipped.
    fn config_at(&self, tau: f64) -> DVector<C64> {
        let sec = &self.spec.sectors[self.k];
        let chi = self.model.chi;
        let cut = -(1e-32 * self.norm_sqr(tau)).ln();
        let m = self.decay.partition_point(|&d| d * tau < cut).max(1);
        let (mut re, mut im) = (DVector::zeros(m), DVector::zeros(m));
        for (i, ((c, &l), &d)) in self.coeffs.iter().zip(&sec.evals).zip(&self.decay).take(m).enumerate() {
            let a = c * C64::from_polar((-0.5 * d * tau).exp(), -chi * l * tau);
            re[i] = a.re;
            im[i] = a.im;
        }
        let v = sec.evecs.columns(0, m);
        let re = v * re;
        let im = v * im;
        re.zip_map(&im, C64::new)
    }

    fn to_pure(&self, config: &DVector<C64>) -> PureState {
        let n = self.spec.n;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        let norm = config.norm();
        for (i, &b) in self.spec.sectors[self.k].sector.configs.iter().enumerate() {
            amps[b as usize] = config[i] / norm;
        }
        PureState::from_amplitudes(n, amps).expect("size checked")
    }

    fn rates(&self, config: &DVector<C64>) -> Vec<(Channel, f64)> {
        let norm2 = config.norm_squared();
        let sec = &self.spec.sectors[self.k];
        let mut rates = Vec::new();
        if self.model.gamma > 0.0 && self.k > 0 {
            let fpsi = &sec.f_down * config;
            rates.push((Channel::Collective, self.model.gamma * fpsi.norm_squared() / norm2));
        }
        let n = self.spec.n;
        let mut occ = vec![0.0; n];
        if self.model.gamma_loss > 0.0 {
            for (i, &b) in sec.sector.configs.iter().enumerate() {
                let p = config[i].norm_sqr() / norm2;
                for (j, o) in occ.iter_mut().enumerate() {
                    if b >> j & 1 == 1 {
                        *o += p;
                    }
                }
            }
        }
        let sz = self.k as f64 - n as f64 / 2.0;
        local_rates(self.model, n, &occ, sz * sz, &mut rates);
        rates
    }

    fn jump(&mut self, channel: Channel, config: &DVector<C64>) {
        let sec = &self.spec.sectors[self.k];
        match channel {
            Channel::Collective => {
                let out = &sec.f_down * config;
                self.reset(self.k - 1, &out);
            }
            Channel::Loss(j) => {
                let below = &self.spec.sectors[self.k - 1].sector;
                let mut out = DVector::zeros(below.dim());
                for (i, &b) in sec.sector.configs.iter().enumerate() {
                    if b >> j & 1 == 1 {
                        out[below.index_of(b ^ (1 << j)).expect("lower config")] += config[i];
                    }
                }
                self.reset(self.k - 1, &out);
            }
            Channel::DephasingSite(j) => {
                let mut out = config.clone();
                for (i, &b) in sec.sector.configs.iter().enumerate() {
                    if b >> j & 1 == 0 {
                        out[i] = -out[i];
                    }
                }
                self.reset(self.k, &out);
            }
            // S^z is a multiple of the identity on a sector.
            Channel::DephasingCommon => self.reset(self.k, config),
        }
    }
}

pub(super) fn bisect_crossing(lo: f64, hi: f64, r: f64, norm: &dyn Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        if hi - lo <= JUMP_TIME_RTOL * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if norm(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn run_spectral(
    spec: &Spectral,
    model: &EffectiveModel,
    k0: usize,
    init: &DVector<C64>,
    grid: &TimeGrid,
    rng: &mut ChaCha8Rng,
    rec: &mut Recorder,
) -> Result<()> {
    let mut st = SpectralState::new(spec, model, k0, init);
    let mut base = grid.t_start;
    let mut r = threshold(rng);
    let mut gi = 0;
    let mut last_tau = 0.0;
    while gi < grid.n_points {
        let tau = grid.time(gi) - base;
        if st.norm_sqr(tau) > r {
            let cfg = st.config_at(tau);
            let psi = st.to_pure(&cfg);
            rec.record(gi, &psi);
            gi += 1;
            last_tau = tau;
            if st.asymptotic_norm_sqr() > r && st.decaying_weight(tau) < 1e-15 * st.norm_sqr(tau) {
                rec.repeat_last(gi, grid.n_points, &psi);
                return Ok(());
            }
            continue;
        }
        let t_jump = bisect_crossing(last_tau, tau, r, &|x| st.norm_sqr(x));
        let cfg = st.config_at(t_jump);
        let rates = st.rates(&cfg);
        let channel = pick_channel(&rates, rng)?;
        st.jump(channel, &cfg);
        rec.out.jumps += 1;
        base += t_jump;
        last_tau = 0.0;
        r = threshold(rng);
    }
    Ok(())
}

/// Full-space no-jump generator for the RK4 engine.
struct Generator<'a> {
    model: &'a EffectiveModel,
    compiled: CompiledRule,
    n: usize,
    /// Hermitian diagonal: tail energy.
    energy: Vec<f64>,
    /// Anti-Hermitian diagonal: half the site-local decay rate.
    half_decay: Vec<f64>,
}

impl<'a> Generator<'a> {
    fn new(model: &'a EffectiveModel, n: usize) -> Self {
        let dim = 1usize << n;
        let boundary = model.rule.boundary();
        let energy = (0..dim)
            .map(|b| {
                if model.v_nnn == 0.0 {
                    0.0
                } else {
                    model.v_nnn * nnn_pairs(b as u64, n, boundary) as f64
                }
            })
            .collect();
        let half_decay = (0..dim)
            .map(|b| {
                let k = (b as u64).count_ones() as f64;
                let sz = sz_of(b as u64, n);
                0.5 * (model.gamma_loss * k
                    + model.gamma_deph_ind * n as f64
                    + model.gamma_deph_common * sz * sz)
            })
            .collect();
        Self {
            model,
            compiled: model.rule.compile(n),
            n,
            energy,
            half_decay,
        }
    }

    /// `out = -i H_nh psi`.
    fn apply(&self, psi: &[C64], out: &mut [C64], tmp: &mut [C64]) {
        let zero = C64::new(0.0, 0.0);
        tmp.iter_mut().for_each(|z| *z = zero);
        out.iter_mut().for_each(|z| *z = zero);
        f_into(&self.compiled, psi, tmp);
        fdag_into(&self.compiled, tmp, out);
        // out holds F†F psi.
        let coll = C64::new(-0.5 * self.model.gamma, -self.model.chi);
        for (b, o) in out.iter_mut().enumerate() {
            *o = coll * *o + C64::new(-self.half_decay[b], -self.energy[b]) * psi[b];
        }
    }

    fn rk4(&self, psi: &[C64], h: f64, work: &mut Rk4Work) -> Vec<C64> {
        let hc = C64::new(h, 0.0);
        let half = C64::new(0.5 * h, 0.0);
        let Rk4Work { k1, k2, k3, k4, stage, tmp } = work;
        self.apply(psi, k1, tmp);
        for i in 0..psi.len() {
            stage[i] = psi[i] + half * k1[i];
        }
        self.apply(stage, k2, tmp);
        for i in 0..psi.len() {
            stage[i] = psi[i] + half * k2[i];
        }
        self.apply(stage, k3, tmp);
        for i in 0..psi.len() {
            stage[i] = psi[i] + hc * k3[i];
        }
        self.apply(stage, k4, tmp);
        let sixth = C64::new(h / 6.0, 0.0);
        (0..psi.len())
            .map(|i| psi[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    fn rates(&self, psi: &[C64]) -> Vec<(Channel, f64)> {
        let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let mut rates = Vec::new();
        if self.model.gamma > 0.0 {
            let mut tmp = vec![C64::new(0.0, 0.0); psi.len()];
            f_into(&self.compiled, psi, &mut tmp);
            let f2: f64 = tmp.iter().map(|a| a.norm_sqr()).sum();
            rates.push((Channel::Collective, self.model.gamma * f2 / norm2));
        }
        let mut occ = vec![0.0; self.n];
        let mut sz2 = 0.0;
        for (b, a) in psi.iter().enumerate() {
            let p = a.norm_sqr() / norm2;
            if p == 0.0 {
                continue;
            }
            let sz = sz_of(b as u64, self.n);
            sz2 += p * sz * sz;
            for (j, o) in occ.iter_mut().enumerate() {
                if b >> j & 1 == 1 {
                    *o += p;
                }
            }
        }
        local_rates(self.model, self.n, &occ, sz2, &mut rates);
        rates
    }

    fn jump(&self, channel: Channel, psi: &[C64]) -> Vec<C64> {
        let zero = C64::new(0.0, 0.0);
        let mut out = vec![zero; psi.len()];
        match channel {
            Channel::Collective => f_into(&self.compiled, psi, &mut out),
            Channel::Loss(j) => {
                for (b, a) in psi.iter().enumerate() {
                    if b >> j & 1 == 1 {
                        out[b ^ (1 << j)] += a;
                    }
                }
            }
            Channel::DephasingSite(j) => {
                for (b, a) in psi.iter().enumerate() {
                    out[b] = if b >> j & 1 == 1 { *a } else { -a };
                }
            }
            Channel::DephasingCommon => {
                for (b, a) in psi.iter().enumerate() {
                    out[b] = a * sz_of(b as u64, self.n);
                }
            }
        }
        let norm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        out.iter_mut().for_each(|a| *a /= norm);
        out
    }
}

/// `Σ_j n_j n_{j+2}` with the chain boundary.
fn nnn_pairs(bits: u64, n: usize, boundary: crate::spin::Boundary) -> usize {
    let starts = match boundary {
        crate::spin::Boundary::Periodic if n > 2 => n,
        crate::spin::Boundary::Periodic => 0,
        crate::spin::Boundary::Open => n.saturating_sub(2),
    };
    (0..starts)
        .filter(|&j| bits >> j & 1 == 1 && bits >> ((j + 2) % n) & 1 == 1)
        .count()
}

struct Rk4Work {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    stage: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Work {
    fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            stage: z.clone(),
            tmp: z,
        }
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

fn normalized_state(n: usize, v: &[C64]) -> PureState {
    let norm = norm_sqr(v).sqrt();
    PureState::from_amplitudes(n, v.iter().map(|a| a / norm).collect()).expect("size checked")
}

fn run_rk4(
    model: &EffectiveModel,
    init: &PureState,
    grid: &TimeGrid,
    dt: f64,
    rng: &mut ChaCha8Rng,
    rec: &mut Recorder,
) -> Result<()> {
    let n = init.n_sites();
    let gen = Generator::new(model, n);
    let mut work = Rk4Work::new(init.dim());
    let mut psi: Vec<C64> = init.amplitudes().to_vec();
    let mut r = threshold(rng);
    let mut t = grid.t_start;
    rec.record(0, init);
    for gi in 1..grid.n_points {
        let target = grid.time(gi);
        while t < target {
            let h = dt.min(target - t);
            let next = gen.rk4(&psi, h, &mut work);
            let nn = norm_sqr(&next);
            if !nn.is_finite() {
                return Err(Error::numeric(format!("non-finite state at t = {t}")));
            }
            if nn > r {
                psi = next;
                t = if target - t <= dt { target } else { t + h };
                continue;
            }
            let start = psi.clone();
            let h_jump = bisect_crossing(0.0, h, r, &|x| norm_sqr(&gen.rk4(&start, x, &mut Rk4Work::new(start.len()))));
            let at = gen.rk4(&start, h_jump, &mut work);
            let rates = gen.rates(&at);
            let channel = pick_channel(&rates, rng)?;
            psi = gen.jump(channel, &at);
            rec.out.jumps += 1;
            t += h_jump;
            r = threshold(rng);
        }
        rec.record(gi, &normalized_state(n, &psi));
    }
    Ok(())
}

/// Excitation number of `psi` if it lies in a single sector.
fn single_sector(psi: &PureState) -> Option<usize> {
    let mut k = None;
    for (b, a) in psi.amplitudes().iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let kb = (b as u64).count_ones() as usize;
        match k {
            None => k = Some(kb),
            Some(k0) if k0 != kb => return None,
            _ => {}
        }
    }
    k
}

/// Quantum-jump unraveling of the effective model.
///
/// Each trajectory starts from `init`, draws a threshold `r ∈ (0, 1]` and
/// evolves under `H_nh` until `‖ψ‖² = r`; the jump channel is then drawn in
/// proportion to its instantaneous rate. Trajectory `i` uses random substream
/// `i` of `seed`, so results do not depend on thread count.
pub fn run_quantum_jumps(
    model: &EffectiveModel,
    init: &PureState,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    observables: &[Observable],
    options: &JumpOptions,
) -> Result<TrajectoryResult> {
    model.validate()?;
    if n_traj == 0 {
        return Err(Error::invalid("n_traj must be positive"));
    }
    let n = init.n_sites();
    if n > DENSE_MAX_SITES {
        return Err(Error::resource(format!("trajectories support N <= {DENSE_MAX_SITES}")));
    }
    if !init.is_normalized() {
        return Err(Error::invalid("initial state must be normalized"));
    }
    let sector = single_sector(init);
    let spectral_ok = model.v_nnn == 0.0 && sector.is_some() && n <= SPECTRAL_MAX_SITES;
    let use_spectral = match options.engine {
        Engine::Auto => spectral_ok,
        Engine::Spectral if !spectral_ok => {
            return Err(Error::invalid(
                "spectral engine needs V2 = 0, N <= 12 and an initial state of fixed excitation number",
            ))
        }
        Engine::Spectral => true,
        Engine::Rk4 => false,
    };
    let dt = match options.dt {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => return Err(Error::invalid(format!("dt must be positive, got {dt}"))),
        None => {
            let scale = model.rate_scale().max(f64::MIN_POSITIVE) * n as f64;
            (0.01 / scale).min(grid.step())
        }
    };
    let snapshot_at = options.record.indices(grid.n_points);
    let spectral = if use_spectral {
        let k0 = sector.expect("checked");
        Some((Spectral::build(&model.rule.compile(n), n, k0), k0))
    } else {
        None
    };
    let init_cfg = spectral.as_ref().map(|(spec, k0)| {
        let sec = &spec.sectors[*k0].sector;
        DVector::from_iterator(sec.dim(), sec.configs.iter().map(|&b| init.amplitudes()[b as usize]))
    });

    let outcomes: Vec<Outcome> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let mut rec = Recorder::new(model, observables, &snapshot_at, grid.n_points);
            match (&spectral, &init_cfg) {
                (Some((spec, k0)), Some(cfg)) => {
                    run_spectral(spec, model, *k0, cfg, grid, &mut rng, &mut rec)?
                }
                _ => run_rk4(model, init, grid, dt, &mut rng, &mut rec)?,
            }
            Ok(rec.out)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(reduce(grid, seed, observables, snapshot_at, outcomes))
}

fn reduce(
    grid: &TimeGrid,
    seed: u64,
    observables: &[Observable],
    snapshot_indices: Vec<usize>,
    outcomes: Vec<Outcome>,
) -> TrajectoryResult {
    let n_traj = outcomes.len();
    let mut table = BTreeMap::new();
    for (o, obs) in observables.iter().enumerate() {
        let rows: Vec<Vec<f64>> = outcomes.iter().map(|out| out.values[o].clone()).collect();
        table.insert(obs.to_string(), Series::from_samples(&rows, grid.n_points));
    }
    let jumps = outcomes.iter().map(|o| o.jumps).sum();
    let snapshots = if snapshot_indices.is_empty() {
        Vec::new()
    } else {
        outcomes.into_iter().map(|o| o.snapshots).collect()
    };
    TrajectoryResult {
        grid: *grid,
        observables: table,
        n_traj,
        master_seed: seed,
        snapshot_indices,
        snapshots,
        jumps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{Boundary, ConstraintRule};

    fn grid(t: f64, n: usize) -> TimeGrid {
        TimeGrid::new(0.0, t, n).unwrap()
    }

    #[test]
    fn dicke_pair_cascade() {
        let model = EffectiveModel::new(ConstraintRule::dicke(Boundary::Periodic), 1.0);
        let g = grid(3.0, 13);
        let res = run_quantum_jumps(
            &model,
            &PureState::all_up(2).unwrap(),
            &g,
            1000,
            11,
            &[Observable::Density],
            &JumpOptions::default(),
        )
        .unwrap();
        for (i, t) in g.times().into_iter().enumerate() {
            let exact = (-2.0 * t).exp() * (1.0 + t);
            let s = res.series("n").unwrap();
            assert!((s.mean[i] - exact).abs() <= 3.0 * s.sem[i] + 1e-12, "t={t}");
        }
    }

    #[test]
    fn east_pair_reaches_bell_state() {
        let rule = ConstraintRule::east(Boundary::Periodic);
        let model = EffectiveModel::new(rule, 1.0);
        let g = grid(10.0, 3);
        let res = run_quantum_jumps(
            &model,
            &PureState::all_up(2).unwrap(),
            &g,
            50,
            3,
            &[Observable::Density, Observable::Nadj],
            &JumpOptions::recording(Record::At(vec![2])),
        )
        .unwrap();
        assert!((res.mean("n")[2] - 0.5).abs() < 1e-12);
        let bell = PureState::from_terms(&[("01", 1.0), ("10", 1.0)]).unwrap().normalized().unwrap();
        for psi in res.states_at(0) {
            assert!((psi.inner(&bell).unwrap().norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn engines_agree_statistically() {
        let rule = ConstraintRule::east(Boundary::Periodic);
        let model = EffectiveModel::new(rule, 1.0).with_chi(0.3).with_loss(0.05).with_dephasing(0.1, 0.2);
        let g = grid(2.0, 5);
        let init = PureState::all_up(4).unwrap();
        let obs = [Observable::Density, Observable::Nadj];
        let run = |engine| {
            run_quantum_jumps(&model, &init, &g, 800, 5, &obs, &JumpOptions { engine, ..Default::default() }).unwrap()
        };
        let a = run(Engine::Spectral);
        let b = run(Engine::Rk4);
        for name in ["n", "Nadj"] {
            for i in 0..g.n_points {
                let d = (a.mean(name)[i] - b.mean(name)[i]).abs();
                let s = (a.sem(name)[i].powi(2) + b.sem(name)[i].powi(2)).sqrt();
                assert!(d <= 4.0 * s + 1e-12, "{name} at {i}: {d} vs {s}");
            }
        }
    }

    #[test]
    fn same_seed_same_result_across_thread_counts() {
        let model = EffectiveModel::new(ConstraintRule::east(Boundary::Periodic), 1.0);
        let g = grid(2.0, 5);
        let init = PureState::all_up(5).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    run_quantum_jumps(&model, &init, &g, 40, 9, &[Observable::Density], &JumpOptions::default())
                        .unwrap()
                })
        };
        assert_eq!(run(1).mean("n"), run(3).mean("n"));
    }

    #[test]
    fn common_dephasing_leaves_density_law_unchanged() {
        let rule = ConstraintRule::east(Boundary::Periodic);
        let g = grid(2.0, 5);
        let init = PureState::all_up(4).unwrap();
        let a = run_quantum_jumps(&EffectiveModel::new(rule.clone(), 1.0), &init, &g, 600, 2, &[Observable::Density], &JumpOptions::default()).unwrap();
        let b = run_quantum_jumps(&EffectiveModel::new(rule, 1.0).with_dephasing(0.0, 5.0), &init, &g, 600, 2, &[Observable::Density], &JumpOptions::default()).unwrap();
        for i in 0..g.n_points {
            let s = (a.sem("n")[i].powi(2) + b.sem("n")[i].powi(2)).sqrt();
            assert!((a.mean("n")[i] - b.mean("n")[i]).abs() <= 3.0 * s + 1e-12);
        }
    }

    #[test]
    fn loss_empties_the_chain() {
        let model = EffectiveModel::new(ConstraintRule::east(Boundary::Periodic), 1.0).with_loss(0.5);
        let g = grid(40.0, 3);
        let res = run_quantum_jumps(&model, &PureState::all_up(4).unwrap(), &g, 50, 1, &[Observable::Density], &JumpOptions::default()).unwrap();
        assert!(res.mean("n")[2] < 1e-3);
    }

    #[test]
    fn tail_term_uses_integrator() {
        let model = EffectiveModel::new(ConstraintRule::east(Boundary::Periodic), 1.0).with_tail(0.5);
        let g = grid(1.0, 3);
        let init = PureState::all_up(4).unwrap();
        assert!(run_quantum_jumps(&model, &init, &g, 4, 1, &[Observable::Density], &JumpOptions { engine: Engine::Spectral, ..Default::default() }).is_err());
        let res = run_quantum_jumps(&model, &init, &g, 20, 1, &[Observable::Density], &JumpOptions::default()).unwrap();
        assert!(res.mean("n")[2] < 1.0);
    }

    #[test]
    fn nnn_pair_counting() {
        assert_eq!(nnn_pairs(0b0101, 4, Boundary::Periodic), 2);
        assert_eq!(nnn_pairs(0b0101, 4, Boundary::Open), 1);
        assert_eq!(nnn_pairs(0b11111, 5, Boundary::Open), 3);
    }
}
