//! One handler per subcommand. Each takes a resolved configuration and writes
//! its outputs through an [`Emitter`].

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fs;

use kcsr_core::click_limit::{boolean_lower_bound, layer_spectrum, ode_density_and};
use kcsr_core::dark::{fragmentation_report, kernel_basis, DarkClass};
use kcsr_core::dtwa::{run_dtwa, DtwaParams, PHOTONS};
use kcsr_core::dynamics::{
    prep_time, reconstruct_density, run_full_cavity, run_quantum_jumps, EffectiveModel, FullCavityModel, JumpOptions, Record,
    DensityMatrix, TimeGrid, TrajectoryResult,
};
use kcsr_core::entanglement::{log_negativity, mutual_information_matrix, witness, Bipartition};
use kcsr_core::model_reduction::{alpha, eliminate_cavity, raman_reduce, validity_margin, CavityParams, RamanParams};
use kcsr_core::spin::{bitstring, PureState, SpinConfig, C64};
use kcsr_core::stats::jackknife;

use crate::config::{Command, RuleSpec, RunConfig};

/// Fraction of the approach to stationarity that defines the preparation time.
const PREP_FRACTION: f64 = 0.7;

/// Largest chain for which `dark` reports a mutual-information matrix.
const MI_MAX_SITES: usize = 10;
use crate::output::{Emitter, Table};
use crate::CliError;

/// Per-trajectory states written by `trajectories` and read by `negativity`
/// and `witness`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub n_sites: usize,
    pub rule: RuleSpec,
    pub master_seed: u64,
    pub times: Vec<f64>,
    /// `states[s][traj]` holds interleaved `re, im` amplitudes at `times[s]`.
    pub states: Vec<Vec<Vec<f64>>>,
}

impl SnapshotFile {
    fn from_result(res: &TrajectoryResult, n: usize, rule: &RuleSpec) -> Self {
        let flat = |psi: &PureState| psi.amplitudes().iter().flat_map(|a| [a.re, a.im]).collect();
        Self {
            n_sites: n,
            rule: rule.clone(),
            master_seed: res.master_seed,
            times: res.snapshot_indices.iter().map(|&i| res.grid.time(i)).collect(),
            states: (0..res.snapshot_indices.len())
                .map(|s| res.states_at(s).map(flat).collect())
                .collect(),
        }
    }

    fn states(&self, s: usize) -> Result<Vec<PureState>, CliError> {
        self.states[s]
            .iter()
            .map(|v| {
                let amps = v.chunks(2).map(|c| C64::new(c[0], c.get(1).copied().unwrap_or(0.0))).collect();
                Ok(PureState::from_amplitudes(self.n_sites, amps)?)
            })
            .collect()
    }
}

fn n_sites(c: &RunConfig) -> usize {
    c.n_sites.expect("resolved")
}

fn initial_state(c: &RunConfig) -> Result<PureState, CliError> {
    Ok(match &c.state.initial {
        Some(s) => PureState::basis(SpinConfig::from_bitstring(s)?)?,
        None => PureState::all_up(n_sites(c))?,
    })
}

fn series_table(res: &TrajectoryResult, names: &[String]) -> Table {
    let mut header = vec!["t".to_string()];
    for n in names {
        header.push(n.clone());
        header.push(format!("{n}_sem"));
    }
    let mut t = Table::new(header);
    for (i, time) in res.grid.times().into_iter().enumerate() {
        let mut row = vec![time];
        for n in names {
            row.push(res.mean(n)[i]);
            row.push(res.sem(n)[i]);
        }
        t.push_f64(&row);
    }
    t
}

fn sidecar(c: &RunConfig, res: &TrajectoryResult, extra: Value) -> Value {
    let mut v = json!({
        "subcommand": c.subcommand.map(Command::name),
        "N": c.n_sites,
        "rule": c.rule,
        "model": c.model,
        "grid": c.grid,
        "n_traj": res.n_traj,
        "seed": res.master_seed,
        "observables": res.observables.keys().collect::<Vec<_>>(),
        "jumps": res.jumps,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

fn rates(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let m = &c.model;
    let p = CavityParams {
        g: m.g.expect("resolved"),
        kappa: m.kappa.expect("resolved"),
        delta: m.delta.expect("resolved"),
        n_atoms: c.n_sites.unwrap_or(1),
    };
    let r = eliminate_cavity(&p)?;
    let a = alpha(&p);
    let v = validity_margin(&p);
    let record = json!({
        "g": p.g,
        "kappa": p.kappa,
        "delta": p.delta,
        "n_atoms": p.n_atoms,
        "gamma": r.gamma,
        "chi": r.chi,
        "alpha_re": a.re,
        "alpha_im": a.im,
        "validity_margin": v.margin.is_finite().then_some(v.margin),
        "validity_warning": v.warning,
    });
    print!("{}", crate::output::render_json(&record)?);
    out.json(".json", &record)?;
    Ok(())
}

fn raman(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let r = &c.raman;
    let p = RamanParams {
        g: r.g.expect("resolved"),
        omega: r.omega.expect("resolved"),
        delta_e: r.delta_e.expect("resolved"),
        gamma_e: r.gamma_e.expect("resolved"),
        kappa: r.kappa.expect("resolved"),
    };
    let red = raman_reduce(&p)?;
    let mut record = Map::new();
    for (k, v) in [serde_json::to_value(p), serde_json::to_value(red)]
        .into_iter()
        .filter_map(Result::ok)
        .filter_map(|v| match v {
            Value::Object(m) => Some(m),
            _ => None,
        })
        .flatten()
    {
        record.insert(k, v);
    }
    print!("{}", crate::output::render_json(&record)?);
    out.json(".json", &record)?;
    Ok(())
}

fn trajectories(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let m = &c.model;
    let rule = c.rule()?;
    let model = EffectiveModel::new(rule, m.gamma.expect("resolved"))
        .with_chi(m.chi.expect("resolved"))
        .with_loss(m.gamma_loss.expect("resolved"))
        .with_dephasing(m.gamma_deph_ind.expect("resolved"), m.gamma_deph_common.expect("resolved"))
        .with_tail(m.v_nnn.expect("resolved"));
    let save = c.state.save_states == Some(true);
    let options = JumpOptions {
        record: if save { Record::All } else { Record::None },
        dt: m.dt,
        ..JumpOptions::default()
    };
    let obs = c.observables()?;
    let res = run_quantum_jumps(
        &model,
        &initial_state(c)?,
        &c.grid()?,
        c.n_traj.expect("resolved"),
        c.seed.expect("resolved"),
        &obs,
        &options,
    )?;
    let names: Vec<String> = obs.iter().map(|o| o.to_string()).collect();
    out.csv(".csv", &series_table(&res, &names))?;
    // Stationary value: mean over the last tenth of the grid.
    let times = res.grid.times();
    let tail = (times.len() / 10).max(1);
    let mut stationary = Map::new();
    let mut prep = Map::new();
    for n in &names {
        let series = res.mean(n);
        let stat = series[series.len() - tail..].iter().sum::<f64>() / tail as f64;
        stationary.insert(n.clone(), json!(stat));
        prep.insert(n.clone(), json!(prep_time(&times, series, stat, PREP_FRACTION)));
    }
    let extra = json!({ "stationary": stationary, "prep_time": prep, "prep_fraction": PREP_FRACTION });
    out.json(".json", &sidecar(c, &res, extra))?;
    if save {
        out.json(".states.json", &SnapshotFile::from_result(&res, n_sites(c), &c.rule))?;
    }
    Ok(())
}

fn full_cavity(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let m = &c.model;
    let mut model = FullCavityModel::new(
        c.rule()?,
        m.g.expect("resolved"),
        m.kappa.expect("resolved"),
        m.delta.expect("resolved"),
    );
    model.n_max = m.n_max;
    model.rwa = m.rwa.expect("resolved");
    if let Some(w) = m.omega_c {
        model.omega_c = w;
    }
    let obs = c.observables()?;
    let (res, n_max) = run_full_cavity(
        &model,
        n_sites(c),
        &c.grid()?,
        c.n_traj.expect("resolved"),
        c.seed.expect("resolved"),
        &obs,
    )?;
    let mut names: Vec<String> = obs.iter().map(|o| o.to_string()).collect();
    names.push(PHOTONS.to_string());
    out.csv(".csv", &series_table(&res, &names))?;
    out.json(".json", &sidecar(c, &res, json!({ "n_max": n_max })))?;
    Ok(())
}

fn layers(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let rule = c.rule()?;
    let n = n_sites(c);
    let k_max = c.layers.k_max.expect("resolved");
    let spec = layer_spectrum(&rule, n, k_max)?;
    let mut t = Table::new(["k", "logB", "intensity", "lower_bound"]);
    for k in 0..k_max {
        t.push(vec![
            k.to_string(),
            crate::output::fmt_f64(spec.log_norms[k]),
            crate::output::fmt_f64(spec.intensities[k]),
            crate::output::fmt_f64(boolean_lower_bound(rule.range(), n, k)),
        ]);
    }
    out.csv(".csv", &t)?;
    Ok(())
}

fn ode(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let points = c.ode.n_points.expect("resolved");
    let grid = TimeGrid::new(0.0, c.ode.tau_end.expect("resolved"), points)?;
    let traj = ode_density_and(c.ode.n0.expect("resolved"), &grid.times())?;
    let mut t = Table::new(["tau", "n"]);
    for (tau, n) in traj.tau.iter().zip(&traj.n) {
        t.push_f64(&[*tau, *n]);
    }
    out.csv(".csv", &t)?;
    Ok(())
}

fn dark(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let n = n_sites(c);
    let basis = kernel_basis(&c.rule()?, n)?;
    let vectors: Vec<Value> = basis
        .vectors()
        .enumerate()
        .map(|(i, (sector, label, psi))| {
            let amps: BTreeMap<String, f64> = psi
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm() > 1e-14)
                .map(|(b, a)| (bitstring(b as u64, n), a.re))
                .collect();
            json!({
                "index": i,
                "sector": sector,
                "class": label.class,
                "nadj": label.nadj,
                "ntri": label.ntri,
                "amplitudes": amps,
            })
        })
        .collect();
    let counts: BTreeMap<String, usize> = [DarkClass::Bitstring, DarkClass::Singlet, DarkClass::TriplePlus]
        .into_iter()
        .map(|k| (format!("{k:?}"), basis.count(k)))
        .collect();
    let mut record = json!({ "N": n, "rule": c.rule, "dimension": basis.len(), "counts": counts, "vectors": vectors });
    if n <= MI_MAX_SITES {
        if let Some((i, (_, _, psi))) = basis
            .vectors()
            .enumerate()
            .find(|(_, (_, label, _))| label.class == DarkClass::Singlet)
        {
            let mi = mutual_information_matrix(&DensityMatrix::from_pure(&psi)?)?;
            let rows: Vec<Vec<f64>> = mi.row_iter().map(|r| r.iter().copied().collect()).collect();
            record["singlet_mutual_information"] = json!({ "index": i, "matrix": rows });
        }
    }
    out.json(".json", &record)?;
    Ok(())
}

fn fragments(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let report = fragmentation_report(&c.rule()?, n_sites(c))?;
    out.json(".json", &json!({ "rule": c.rule, "report": report }))?;
    Ok(())
}

fn read_snapshots(c: &RunConfig) -> Result<SnapshotFile, CliError> {
    let path = c.state.input.as_ref().expect("resolved");
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    let file: SnapshotFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if file.states.len() != file.times.len() {
        return Err(CliError::Config(format!("{}: times and states differ in length", path.display())));
    }
    Ok(file)
}

fn partition(c: &RunConfig, n: usize) -> Result<Bipartition, CliError> {
    Ok(match &c.state.partition {
        Some(a) => Bipartition::new(n, a.clone())?,
        None => Bipartition::half(n)?,
    })
}

fn negativity(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let file = read_snapshots(c)?;
    let part = partition(c, file.n_sites)?;
    let groups = c.state.jackknife_groups.expect("resolved");
    let mut t = Table::new(["t", "EN", "EN_sem"]);
    for (s, &time) in file.times.iter().enumerate() {
        let states = file.states(s)?;
        let failure = std::cell::RefCell::new(None);
        let stat = |keep: &[usize]| match reconstruct_density(keep.iter().map(|&i| &states[i]))
            .and_then(|rho| log_negativity(&rho, &part))
        {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
        let (en, sem) = jackknife(states.len(), groups, stat);
        if let Some(e) = failure.into_inner() {
            return Err(e.into());
        }
        t.push_f64(&[time, en, sem]);
    }
    out.csv(".csv", &t)?;
    Ok(())
}

fn witness_cmd(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let file = read_snapshots(c)?;
    let mut spec = file.rule.clone();
    spec.kind.get_or_insert(kcsr_core::spin::RuleKind::East);
    let rule = RunConfig {
        rule: spec,
        ..RunConfig::default()
    }
    .rule()?;
    let tol = c.state.witness_tol.expect("resolved");
    let mut reports = Vec::new();
    for (s, &time) in file.times.iter().enumerate() {
        let states = file.states(s)?;
        let rho = reconstruct_density(states.iter())?;
        let r = witness(&rho, &rule, tol);
        reports.push(json!({
            "t": time,
            "dark_residual": r.dark_residual,
            "nadj": r.nadj,
            "verdict": format!("{:?}", r.verdict),
        }));
    }
    out.json(
        ".json",
        &json!({ "N": file.n_sites, "rule": file.rule, "tolerance": tol, "snapshots": reports }),
    )?;
    Ok(())
}

fn dtwa(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let m = &c.model;
    let mut p = DtwaParams::for_rule(
        &c.rule()?,
        n_sites(c),
        m.g.expect("resolved"),
        m.kappa.expect("resolved"),
        c.grid()?,
    )?;
    p.delta = m.delta.expect("resolved");
    let [re, im] = m.alpha0.expect("resolved");
    p.alpha0 = C64::new(re, im);
    p.dt = m.dt;
    p.n_traj = c.n_traj.expect("resolved");
    p.seed = c.seed.expect("resolved");
    let obs = c.observables()?;
    let res = run_dtwa(&p, &obs)?;
    let mut names: Vec<String> = obs.iter().map(|o| o.to_string()).collect();
    names.push(PHOTONS.to_string());
    out.csv(".csv", &series_table(&res, &names))?;
    let (a, b, g) = p.coefficients;
    let extra = json!({
        "alpha": a,
        "beta": b,
        "gamma": g,
        "offset": p.offset,
        "dt": p.effective_dt(),
        "dt_requested": p.dt.unwrap_or_else(|| p.default_dt()),
    });
    out.json(".json", &sidecar(c, &res, extra))?;
    Ok(())
}

/// Runs the subcommand of a resolved configuration.
pub fn dispatch(c: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    match c.command()? {
        Command::Rates => rates(c, out),
        Command::Raman => raman(c, out),
        Command::Trajectories => trajectories(c, out),
        Command::FullCavity => full_cavity(c, out),
        Command::Layers => layers(c, out),
        Command::Ode => ode(c, out),
        Command::Dark => dark(c, out),
        Command::Fragments => fragments(c, out),
        Command::Negativity => negativity(c, out),
        Command::Witness => witness_cmd(c, out),
        Command::Dtwa => dtwa(c, out),
    }
}
