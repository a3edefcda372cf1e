use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

use super::jumps::{bisect_crossing, threshold};
use super::model::{FullCavityModel, TimeGrid};
use super::result::{Series, TrajectoryResult};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::spin::{expect_report, f_into, fdag_into, CompiledRule, Observable, PureState, C64};

/// Largest joint Hilbert-space dimension for the full cavity model.
pub const CAVITY_MAX_DIM: usize = 1 << 20;

/// Top-level Fock population that aborts a run.
pub const FOCK_ABORT: f64 = 1e-4;

/// Top-level Fock population accepted by the automatic cutoff search.
pub const FOCK_ACCEPT: f64 = 1e-6;

/// Trajectories used by the cutoff pilot.
const PILOT_TRAJ: usize = 8;

/// Photon-number observable name in result tables.
pub const PHOTONS: &str = "photons";

struct CavityGenerator<'a> {
    model: &'a FullCavityModel,
    compiled: CompiledRule,
    n: usize,
    n_max: usize,
    slice: usize,
}

impl<'a> CavityGenerator<'a> {
    fn new(model: &'a FullCavityModel, n: usize, n_max: usize) -> Self {
        Self {
            model,
            compiled: model.rule.compile(n),
            n,
            n_max,
            slice: 1 << n,
        }
    }

    fn dim(&self) -> usize {
        self.slice * (self.n_max + 1)
    }

    fn scale(&self) -> f64 {
        let m = self.model;
        let photons = self.n_max as f64;
        let mut s = 0.5 * m.kappa * photons
            + m.g.abs() * 2.0 * (photons + 1.0).sqrt() * self.n as f64;
        if m.rwa {
            s += m.delta.abs() * photons;
        } else {
            s += m.omega_c.abs() * photons + (m.omega_c - m.delta).abs() * self.n as f64 / 2.0;
        }
        s.max(f64::MIN_POSITIVE)
    }

    /// `out = -i H_nh psi`.
    fn apply(&self, psi: &[C64], out: &mut [C64], f_buf: &mut [C64], fd_buf: &mut [C64]) {
        let m = self.model;
        let zero = C64::new(0.0, 0.0);
        out.iter_mut().for_each(|z| *z = zero);
        let s = self.slice;
        let omega = if m.rwa { m.delta } else { m.omega_c };
        let omega_s = m.omega_c - m.delta;
        let half_n = self.n as f64 / 2.0;
        for p in 0..=self.n_max {
            let src = &psi[p * s..(p + 1) * s];
            if src.iter().all(|z| *z == zero) {
                continue;
            }
            let diag = C64::new(-0.5 * m.kappa * p as f64, -omega * p as f64);
            for (b, a) in src.iter().enumerate() {
                let mut d = diag;
                if !m.rwa {
                    d += C64::new(0.0, -omega_s * ((b as u64).count_ones() as f64 - half_n));
                }
                out[p * s + b] += d * a;
            }
            if m.g == 0.0 {
                continue;
            }
            f_buf.iter_mut().for_each(|z| *z = zero);
            fd_buf.iter_mut().for_each(|z| *z = zero);
            f_into(&self.compiled, src, f_buf);
            fdag_into(&self.compiled, src, fd_buf);
            let mi = C64::new(0.0, -m.g);
            if p < self.n_max {
                let c = mi * ((p + 1) as f64).sqrt();
                let dst = &mut out[(p + 1) * s..(p + 2) * s];
                for b in 0..s {
                    dst[b] += c * f_buf[b];
                    if !m.rwa {
                        dst[b] += c * fd_buf[b];
                    }
                }
            }
            if p > 0 {
                let c = mi * (p as f64).sqrt();
                let dst = &mut out[(p - 1) * s..p * s];
                for b in 0..s {
                    dst[b] += c * fd_buf[b];
                    if !m.rwa {
                        dst[b] += c * f_buf[b];
                    }
                }
            }
        }
    }

    fn rk4(&self, psi: &[C64], h: f64) -> Vec<C64> {
        let d = psi.len();
        let zero = C64::new(0.0, 0.0);
        let mut fb = vec![zero; self.slice];
        let mut fdb = vec![zero; self.slice];
        let mut k = [vec![zero; d], vec![zero; d], vec![zero; d], vec![zero; d]];
        let mut stage = vec![zero; d];
        let half = 0.5 * h;
        let (k1, rest) = k.split_at_mut(1);
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, k4) = rest.split_at_mut(1);
        self.apply(psi, &mut k1[0], &mut fb, &mut fdb);
        for i in 0..d {
            stage[i] = psi[i] + k1[0][i] * half;
        }
        self.apply(&stage, &mut k2[0], &mut fb, &mut fdb);
        for i in 0..d {
            stage[i] = psi[i] + k2[0][i] * half;
        }
        self.apply(&stage, &mut k3[0], &mut fb, &mut fdb);
        for i in 0..d {
            stage[i] = psi[i] + k3[0][i] * h;
        }
        self.apply(&stage, &mut k4[0], &mut fb, &mut fdb);
        (0..d)
            .map(|i| psi[i] + (k1[0][i] + k2[0][i] * 2.0 + k3[0][i] * 2.0 + k4[0][i]) * (h / 6.0))
            .collect()
    }

    fn lower_photon(&self, psi: &[C64]) -> Vec<C64> {
        let s = self.slice;
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for p in 1..=self.n_max {
            let c = (p as f64).sqrt();
            for b in 0..s {
                out[(p - 1) * s + b] = psi[p * s + b] * c;
            }
        }
        let norm = norm_sqr(&out).sqrt();
        out.iter_mut().for_each(|z| *z /= norm);
        out
    }

    /// Photon-slice weights, normalized.
    fn fock_weights(&self, psi: &[C64]) -> Vec<f64> {
        let total = norm_sqr(psi);
        psi.chunks(self.slice).map(|c| norm_sqr(c) / total).collect()
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

struct CavityOutcome {
    values: Vec<Vec<f64>>,
    photons: Vec<f64>,
    max_top: f64,
    jumps: usize,
}

fn observe(gen: &CavityGenerator, psi: &[C64], observables: &[Observable], out: &mut CavityOutcome) {
    let total = norm_sqr(psi);
    let weights = gen.fock_weights(psi);
    out.max_top = out.max_top.max(weights[gen.n_max]);
    out.photons.push(weights.iter().enumerate().map(|(p, w)| p as f64 * w).sum());
    for (o, obs) in observables.iter().enumerate() {
        let mut acc = 0.0;
        for chunk in psi.chunks(gen.slice) {
            let w = norm_sqr(chunk);
            if w == 0.0 {
                continue;
            }
            let slice = PureState::from_amplitudes(gen.n, chunk.to_vec()).expect("slice size");
            let e = expect_report(*obs, &gen.model.rule, &slice);
            acc += e.value * e.norm_sqr;
        }
        out.values[o].push(acc / total);
    }
}

fn run_one(
    gen: &CavityGenerator,
    grid: &TimeGrid,
    dt: f64,
    observables: &[Observable],
    rng: &mut ChaCha8Rng,
) -> Result<CavityOutcome> {
    let mut psi = vec![C64::new(0.0, 0.0); gen.dim()];
    psi[gen.slice - 1] = C64::new(1.0, 0.0);
    let mut out = CavityOutcome {
        values: vec![Vec::with_capacity(grid.n_points); observables.len()],
        photons: Vec::with_capacity(grid.n_points),
        max_top: 0.0,
        jumps: 0,
    };
    observe(gen, &psi, observables, &mut out);
    let mut r = threshold(rng);
    let mut t = grid.t_start;
    for gi in 1..grid.n_points {
        let target = grid.time(gi);
        while t < target {
            let h = dt.min(target - t);
            let next = gen.rk4(&psi, h);
            let nn = norm_sqr(&next);
            if !nn.is_finite() {
                return Err(Error::numeric(format!("non-finite cavity state at t = {t}")));
            }
            if nn > r {
                let top = norm_sqr(&next[gen.n_max * gen.slice..]) / nn;
                out.max_top = out.max_top.max(top);
                psi = next;
                t = if target - t <= dt { target } else { t + h };
                continue;
            }
            let start = psi.clone();
            let h_jump = bisect_crossing(0.0, h, r, &|x| norm_sqr(&gen.rk4(&start, x)));
            psi = gen.lower_photon(&gen.rk4(&start, h_jump));
            out.jumps += 1;
            t += h_jump;
            r = threshold(rng);
        }
        observe(gen, &psi, observables, &mut out);
    }
    Ok(out)
}

fn run_batch(
    model: &FullCavityModel,
    n: usize,
    n_max: usize,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    observables: &[Observable],
) -> Result<Vec<CavityOutcome>> {
    let gen = CavityGenerator::new(model, n, n_max);
    if gen.dim() > CAVITY_MAX_DIM {
        return Err(Error::resource(format!(
            "joint dimension {} exceeds {CAVITY_MAX_DIM}",
            gen.dim()
        )));
    }
    let dt = (0.05 / gen.scale()).min(grid.step());
    (0..n_traj)
        .into_par_iter()
        .map(|i| run_one(&gen, grid, dt, observables, &mut substream(seed, i as u64)))
        .collect()
}

/// Picks the Fock cutoff: doubles from 4 until a short pilot keeps the top
/// level below `FOCK_ACCEPT`.
pub fn auto_fock_cutoff(model: &FullCavityModel, n: usize, grid: &TimeGrid, seed: u64) -> Result<usize> {
    let mut n_max = 4;
    loop {
        let pilot = run_batch(model, n, n_max, grid, PILOT_TRAJ, seed ^ 0x5EED_F0C4, &[])?;
        let top = pilot.iter().map(|o| o.max_top).fold(0.0, f64::max);
        if top < FOCK_ACCEPT {
            return Ok(n_max);
        }
        n_max *= 2;
        if (n_max + 1) << n > CAVITY_MAX_DIM {
            return Err(Error::resource(format!(
                "no Fock cutoff within the size ceiling keeps the top level below {FOCK_ACCEPT}"
            )));
        }
    }
}

/// Quantum jumps of spins and cavity with jump operator `√κ a`, starting from
/// all spins up and the cavity in vacuum.
pub fn run_full_cavity(
    model: &FullCavityModel,
    n: usize,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    observables: &[Observable],
) -> Result<(TrajectoryResult, usize)> {
    model.validate()?;
    if n == 0 || n > 16 {
        return Err(Error::resource(format!("full cavity model supports 1 <= N <= 16, got {n}")));
    }
    if n_traj == 0 {
        return Err(Error::invalid("n_traj must be positive"));
    }
    let n_max = match model.n_max {
        Some(m) => m,
        None => auto_fock_cutoff(model, n, grid, seed)?,
    };
    let outcomes = run_batch(model, n, n_max, grid, n_traj, seed, observables)?;
    let top = outcomes.iter().map(|o| o.max_top).fold(0.0, f64::max);
    if top > FOCK_ABORT {
        return Err(Error::resource(format!(
            "top Fock level n_max = {n_max} reached population {top:e}; raise n_max"
        )));
    }
    let mut table = BTreeMap::new();
    for (o, obs) in observables.iter().enumerate() {
        let rows: Vec<Vec<f64>> = outcomes.iter().map(|x| x.values[o].clone()).collect();
        table.insert(obs.to_string(), Series::from_samples(&rows, grid.n_points));
    }
    let rows: Vec<Vec<f64>> = outcomes.iter().map(|x| x.photons.clone()).collect();
    table.insert(PHOTONS.to_string(), Series::from_samples(&rows, grid.n_points));
    let jumps = outcomes.iter().map(|o| o.jumps).sum();
    Ok((
        TrajectoryResult {
            grid: *grid,
            observables: table,
            n_traj,
            master_seed: seed,
            snapshot_indices: Vec::new(),
            snapshots: Vec::new(),
            jumps,
        },
        n_max,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{Boundary, ConstraintRule};

    #[test]
    fn decoupled_cavity_stays_empty() {
        let mut m = FullCavityModel::new(ConstraintRule::east(Boundary::Periodic), 0.0, 2.0, 0.0);
        m.n_max = Some(2);
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let (res, _) = run_full_cavity(&m, 3, &g, 4, 1, &[Observable::Density]).unwrap();
        assert!(res.mean(PHOTONS).iter().all(|&x| x == 0.0));
        assert!(res.mean("n").iter().all(|&x| x == 1.0));
    }

    #[test]
    fn single_atom_vacuum_rabi_in_closed_cavity() {
        // One atom, no loss, resonant: P_up(t) = cos²(g t).
        let mut m = FullCavityModel::new(ConstraintRule::dicke(Boundary::Periodic), 1.0, 0.0, 0.0);
        m.n_max = Some(2);
        let g = TimeGrid::new(0.0, 1.5, 4).unwrap();
        let (res, _) = run_full_cavity(&m, 1, &g, 2, 1, &[Observable::Density]).unwrap();
        for (i, t) in g.times().into_iter().enumerate() {
            assert!((res.mean("n")[i] - t.cos().powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn counter_rotating_terms_vanish_at_weak_coupling() {
        let rule = ConstraintRule::dicke(Boundary::Periodic);
        let g = TimeGrid::new(0.0, 2.0, 5).unwrap();
        let mut rwa = FullCavityModel::new(rule.clone(), 0.02, 1.0, 0.0);
        rwa.n_max = Some(3);
        let mut lab = rwa.clone();
        lab.rwa = false;
        lab.omega_c = 20.0;
        let (a, _) = run_full_cavity(&rwa, 2, &g, 200, 4, &[Observable::Density]).unwrap();
        let (b, _) = run_full_cavity(&lab, 2, &g, 200, 4, &[Observable::Density]).unwrap();
        for i in 0..g.n_points {
            assert!((a.mean("n")[i] - b.mean("n")[i]).abs() < 0.02);
        }
    }
}
