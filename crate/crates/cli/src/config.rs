//! Run configuration: TOML in, fully resolved TOML out.
//!
//! [`parse_config`] rejects unknown keys and type mismatches with the TOML
//! parser's line/column diagnostics. [`RunConfig::resolve`] fills every
//! default so the resolved form can be written back and re-read unchanged.

use serde::{Deserialize, Deserializer, Serialize};
use std::path::PathBuf;

use kcsr_core::dynamics::TimeGrid;
use kcsr_core::model_reduction::{eliminate_cavity, CavityParams};
use kcsr_core::spin::{table_len, Boundary, ConstraintRule, Observable, RuleKind};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rates,
    Raman,
    Trajectories,
    FullCavity,
    Layers,
    Ode,
    Dark,
    Fragments,
    Negativity,
    Witness,
    Dtwa,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Rates => "rates",
            Command::Raman => "raman",
            Command::Trajectories => "trajectories",
            Command::FullCavity => "full-cavity",
            Command::Layers => "layers",
            Command::Ode => "ode",
            Command::Dark => "dark",
            Command::Fragments => "fragments",
            Command::Negativity => "negativity",
            Command::Witness => "witness",
            Command::Dtwa => "dtwa",
        }
    }

    fn needs_sites(self) -> bool {
        !matches!(self, Command::Rates | Command::Raman | Command::Negativity | Command::Witness | Command::Ode)
    }

    fn samples(self) -> bool {
        matches!(self, Command::Trajectories | Command::FullCavity | Command::Dtwa)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub kind: Option<RuleKind>,
    /// Constraint range `w`.
    pub w: Option<usize>,
    /// Truth table over the `2w` neighbours, as 0/1 entries.
    pub table: Option<Vec<u8>>,
    pub boundary: Option<Boundary>,
    /// Occupation read for neighbours past an open edge.
    pub fill: Option<bool>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RuleField {
    Name(RuleKind),
    Spec(toml::Value),
}

/// Accepts `rule = "east"` as shorthand for `[rule] kind = "east"`.
fn rule_spec<'de, D: Deserializer<'de>>(d: D) -> Result<RuleSpec, D::Error> {
    match RuleField::deserialize(d)? {
        RuleField::Name(kind) => Ok(RuleSpec {
            kind: Some(kind),
            ..RuleSpec::default()
        }),
        RuleField::Spec(v) => v.try_into().map_err(|e: toml::de::Error| {
            serde::de::Error::custom(format!("rule: {}", e.message()))
        }),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Collective decay rate `Γ`; derived from `g, κ, Δ` when absent and `kappa` is set.
    pub gamma: Option<f64>,
    pub chi: Option<f64>,
    pub g: Option<f64>,
    pub kappa: Option<f64>,
    pub delta: Option<f64>,
    pub gamma_loss: Option<f64>,
    pub gamma_deph_ind: Option<f64>,
    pub gamma_deph_common: Option<f64>,
    /// Next-nearest-neighbour tail coupling `V₂`.
    pub v_nnn: Option<f64>,
    /// Photon cutoff for the full cavity model; automatic when absent.
    pub n_max: Option<usize>,
    pub rwa: Option<bool>,
    pub omega_c: Option<f64>,
    /// Initial coherent cavity amplitude `[re, im]` for DTWA.
    pub alpha0: Option<[f64; 2]>,
    /// Integration step override for trajectory and DTWA engines.
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub t_start: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

fn default_t_end() -> f64 {
    10.0
}

fn default_points() -> usize {
    101
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: default_t_end(),
            n_points: default_points(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayersSpec {
    pub k_max: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSpec {
    /// Initial density; `1 − 1/N` when absent.
    pub n0: Option<f64>,
    pub tau_end: Option<f64>,
    pub n_points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanSpec {
    pub g: Option<f64>,
    pub omega: Option<f64>,
    pub delta_e: Option<f64>,
    pub gamma_e: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    /// Initial bitstring (site 1 first); all spins up when absent.
    pub initial: Option<String>,
    /// Write per-trajectory state snapshots at every grid point.
    pub save_states: Option<bool>,
    /// Snapshot file read by `negativity` and `witness`.
    pub input: Option<PathBuf>,
    /// Sites of subsystem A (1-based); the first `⌈N/2⌉` sites when absent.
    pub partition: Option<Vec<usize>>,
    pub witness_tol: Option<f64>,
    pub jackknife_groups: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub out_dir: Option<PathBuf>,
    /// File stem for every output; the subcommand name when absent.
    pub prefix: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<Command>,
    #[serde(rename = "N", alias = "n_sites")]
    pub n_sites: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub n_traj: Option<usize>,
    pub observables: Option<Vec<String>>,
    #[serde(default, deserialize_with = "rule_spec")]
    pub rule: RuleSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub layers: LayersSpec,
    #[serde(default)]
    pub ode: OdeSpec,
    #[serde(default)]
    pub raman: RamanSpec,
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require<T: Copy>(v: Option<T>, field: &str, cmd: Command) -> Result<T, CliError> {
    v.ok_or_else(|| invalid(format!("{field}: required by `{}`", cmd.name())))
}

impl RunConfig {
    /// Serialised TOML of this configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn command(&self) -> Result<Command, CliError> {
        self.subcommand.ok_or_else(|| invalid("subcommand: not given on the command line or in the config"))
    }

    /// Validates and fills every default for the selected subcommand.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let cmd = self.command()?;
        let mut c = self.clone();
        if cmd.needs_sites() && c.n_sites.is_none() {
            return Err(invalid(format!("N: required by `{}`", cmd.name())));
        }
        if c.n_sites == Some(0) {
            return Err(invalid("N: must be positive"));
        }
        c.seed.get_or_insert(0);
        if c.threads == Some(0) {
            return Err(invalid("threads: must be positive"));
        }

        let kind = *c.rule.kind.get_or_insert(RuleKind::East);
        c.rule.boundary.get_or_insert(Boundary::Periodic);
        let named_range = usize::from(kind != RuleKind::Dicke);
        let w = *c.rule.w.get_or_insert(named_range);
        if kind == RuleKind::Custom {
            let want = table_len(w).map_err(|e| invalid(format!("rule.w: {e}")))?;
            let table = c
                .rule
                .table
                .as_ref()
                .ok_or_else(|| invalid("rule.table: required for custom rules"))?;
            if table.len() != want {
                return Err(invalid(format!(
                    "rule.table: expected length {want} for w = {w}, got {}",
                    table.len()
                )));
            }
            if table.iter().any(|&b| b > 1) {
                return Err(invalid("rule.table: entries must be 0 or 1"));
            }
        } else {
            if w != named_range {
                return Err(invalid(format!("rule.w: this rule has w = {named_range}, got {w}")));
            }
            if c.rule.table.is_some() {
                return Err(invalid("rule.table: only allowed for custom rules"));
            }
        }
        if c.rule.fill.is_none() {
            c.rule.fill = Some(kind != RuleKind::East);
        }

        let g = c.grid.clone();
        TimeGrid::new(g.t_start, g.t_end, g.n_points).map_err(|e| invalid(format!("grid: {e}")))?;

        if cmd == Command::Layers {
            let n = c.n_sites.expect("checked");
            let k = *c.layers.k_max.get_or_insert(n);
            if k > n {
                return Err(invalid(format!("layers.k_max: {k} exceeds N = {n}")));
            }
        }
        if cmd == Command::Ode {
            if kind != RuleKind::And {
                return Err(invalid("ode: the closed-form density equation is available for the AND rule only"));
            }
            if c.ode.n0.is_none() {
                let n = c
                    .n_sites
                    .ok_or_else(|| invalid("ode.n0: required when N is absent"))?;
                c.ode.n0 = Some(1.0 - 1.0 / n as f64);
            }
            c.ode.tau_end.get_or_insert(10.0);
            c.ode.n_points.get_or_insert(201);
        }

        let m = &mut c.model;
        match cmd {
            Command::Rates | Command::FullCavity | Command::Dtwa => {
                m.g.get_or_insert(1.0);
                require(m.kappa, "model.kappa", cmd)?;
                m.delta.get_or_insert(0.0);
            }
            Command::Trajectories => {
                if m.gamma.is_none() {
                    if let Some(kappa) = m.kappa {
                        let g = *m.g.get_or_insert(1.0);
                        let delta = *m.delta.get_or_insert(0.0);
                        let r = eliminate_cavity(&CavityParams {
                            g,
                            kappa,
                            delta,
                            n_atoms: c.n_sites.unwrap_or(1),
                        })
                        .map_err(|e| invalid(format!("model: {e}")))?;
                        m.gamma = Some(r.gamma);
                        m.chi.get_or_insert(r.chi);
                    }
                }
                m.gamma.get_or_insert(1.0);
                m.chi.get_or_insert(0.0);
                m.gamma_loss.get_or_insert(0.0);
                m.gamma_deph_ind.get_or_insert(0.0);
                m.gamma_deph_common.get_or_insert(0.0);
                m.v_nnn.get_or_insert(0.0);
            }
            _ => {}
        }
        if cmd == Command::FullCavity {
            m.rwa.get_or_insert(true);
            let rwa = m.rwa.expect("set");
            if !rwa {
                require(m.omega_c, "model.omega_c", cmd)?;
            }
        }
        if cmd == Command::Dtwa {
            m.alpha0.get_or_insert([0.0, 0.0]);
        }
        if cmd == Command::Raman {
            let r = &c.raman;
            for (v, f) in [
                (r.g, "raman.g"),
                (r.omega, "raman.omega"),
                (r.delta_e, "raman.delta_e"),
                (r.gamma_e, "raman.gamma_e"),
                (r.kappa, "raman.kappa"),
            ] {
                require(v, f, cmd)?;
            }
        }

        if cmd.samples() {
            let n_traj = *c.n_traj.get_or_insert(200);
            if n_traj < 2 {
                return Err(invalid("n_traj: at least 2 trajectories are needed for error bars"));
            }
            let default: &[&str] = match cmd {
                Command::Dtwa => &["n", "Sz", "Sperp2", "Nadj"],
                _ => &["n", "Sz", "Sperp2", "Nadj", "FdagF"],
            };
            let obs = c
                .observables
                .get_or_insert_with(|| default.iter().map(|s| s.to_string()).collect());
            obs.retain(|o| o != "photons");
            for o in obs.iter() {
                if o == "EN" {
                    return Err(invalid("observables: EN is produced by the `negativity` subcommand"));
                }
                let parsed: Observable = o.parse().map_err(|e| invalid(format!("observables: {e}")))?;
                if cmd == Command::Dtwa && parsed == Observable::FdagF {
                    return Err(invalid("observables: FdagF is not available from DTWA"));
                }
            }
            c.state.save_states.get_or_insert(false);
        }
        if let Some(init) = &c.state.initial {
            if init.len() != c.n_sites.unwrap_or(0) || !init.chars().all(|ch| ch == '0' || ch == '1') {
                return Err(invalid(format!("state.initial: expected a 0/1 string of length N, got {init:?}")));
            }
        }
        if matches!(cmd, Command::Negativity | Command::Witness) {
            if c.state.input.is_none() {
                return Err(invalid(format!("state.input: snapshot file required by `{}`", cmd.name())));
            }
            c.state.jackknife_groups.get_or_insert(20);
            c.state.witness_tol.get_or_insert(1e-10);
        }
        c.output.out_dir.get_or_insert_with(|| PathBuf::from("out"));
        c.output.prefix.get_or_insert_with(|| cmd.name().to_string());
        Ok(c)
    }

    /// Constraint rule of a resolved configuration.
    pub fn rule(&self) -> Result<ConstraintRule, CliError> {
        let r = &self.rule;
        let kind = r.kind.unwrap_or(RuleKind::East);
        let boundary = r.boundary.unwrap_or(Boundary::Periodic);
        let rule = match kind {
            RuleKind::Custom => {
                let table = r.table.clone().unwrap_or_default().into_iter().map(|b| b == 1).collect();
                ConstraintRule::custom(r.w.unwrap_or(1), table, boundary)?
            }
            k => ConstraintRule::named(k, boundary)?,
        };
        Ok(match r.fill {
            Some(f) => rule.with_fill(f),
            None => rule,
        })
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.grid.t_start, self.grid.t_end, self.grid.n_points)?)
    }

    pub fn observables(&self) -> Result<Vec<Observable>, CliError> {
        self.observables
            .iter()
            .flatten()
            .map(|o| o.parse().map_err(CliError::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("rule = \"east\"\nN = 8\nsubcommand = \"layers\"\n").unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.rule.boundary, Some(Boundary::Periodic));
        assert_eq!(r.layers.k_max, Some(8));
        assert_eq!(r.rule.fill, Some(false));
        assert_eq!(r.output.prefix.as_deref(), Some("layers"));
    }

    #[test]
    fn wrong_table_length_is_rejected() {
        let text = "subcommand = \"layers\"\nN = 6\n[rule]\nkind = \"custom\"\nw = 2\ntable = [1, 0, 1]\n";
        let e = parse_config(text).unwrap().resolve().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("expected length 16"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let e = parse_config("subcommand = \"layers\"\nN = 6\nbogus = 1\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");
        let e = parse_config("[model]\ngama = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("gama"));
        let e = parse_config("[rule]\nkind = \"east\"\nwidth = 2\n").unwrap_err();
        assert!(e.to_string().contains("width"), "{e}");
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let e = parse_config("N = \"eight\"\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn resolved_form_round_trips() {
        let inputs = [
            "rule = \"east\"\nN = 8\nsubcommand = \"layers\"\n",
            "subcommand = \"trajectories\"\nN = 4\n[model]\ng = 1.0\nkappa = 40.0\n[grid]\nt_end = 5.0\n",
            "subcommand = \"dtwa\"\nN = 8\nn_traj = 10\n[model]\nkappa = 30.0\nalpha0 = [0.5, 0.0]\n",
            "subcommand = \"layers\"\nN = 6\n[rule]\nkind = \"custom\"\nw = 1\ntable = [0, 1, 1, 1]\nboundary = \"open\"\n",
        ];
        for text in inputs {
            let resolved = parse_config(text).unwrap().resolve().unwrap();
            let written = resolved.to_toml();
            let again = parse_config(&written).unwrap();
            assert_eq!(again, resolved, "{written}");
            assert_eq!(again.resolve().unwrap().to_toml(), written);
        }
    }

    #[test]
    fn elimination_fills_rates() {
        let c = parse_config("subcommand = \"trajectories\"\nN = 4\n[model]\ng = 1.0\nkappa = 40.0\ndelta = 0.0\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert!((c.model.gamma.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(c.model.chi, Some(0.0));
    }
}
