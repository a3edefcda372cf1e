//! Command-line front end: configuration, dispatch and deterministic output.
//!
//! A run is `kcsr [--config FILE] [flags] <subcommand>`. The configuration is
//! resolved (every default filled), the subcommand writes its CSV/JSON files
//! under `out_dir`, and `<prefix>.manifest.json` records the resolved config
//! with a SHA-256 checksum of each output.

pub mod commands;
pub mod config;
pub mod output;

use clap::Parser;
use std::path::PathBuf;
use std::time::Instant;

pub use config::{parse_config, Command, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] kcsr_core::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration and input problems, otherwise
    /// the category of the underlying failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => e.exit_code(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kcsr", version, about = "Kinetically constrained superradiance toolkit")]
pub struct Cli {
    /// Subcommand; overrides `subcommand` in the config file.
    pub command: Option<Command>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for trajectory sampling.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Override a config key, e.g. `--set model.kappa=30` or `--set N=8`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set {assignment}: expected KEY=VALUE")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let path: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = path.split_last().expect("split yields one item");
    let mut node = table;
    for p in parents {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set {key}: `{p}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl Cli {
    /// Configuration after applying the file, `--set` and the global flags.
    pub fn config(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("reading {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut c = if self.overrides.is_empty() {
            parse_config(&text)?
        } else {
            let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
            for o in &self.overrides {
                apply_override(&mut table, o)?;
            }
            parse_config(&toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?)?
        };
        if let Some(cmd) = self.command {
            c.subcommand = Some(cmd);
        }
        if let Some(s) = self.seed {
            c.seed = Some(s);
        }
        if let Some(t) = self.threads {
            c.threads = Some(t);
        }
        if let Some(d) = &self.out_dir {
            c.output.out_dir = Some(d.clone());
        }
        c.resolve()
    }
}

/// Runs a configuration and returns the paths written, manifest last.
pub fn execute(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let c = config.resolve()?;
    let start = Instant::now();
    let dir = c.output.out_dir.clone().expect("resolved");
    let mut out = output::Emitter::new(&dir, c.output.prefix.as_deref().expect("resolved"))?;
    match c.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?
            .install(|| commands::dispatch(&c, &mut out))?,
        None => commands::dispatch(&c, &mut out)?,
    }
    out.finish(&c, start.elapsed().as_secs_f64())
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = cli.config().and_then(|c| {
        if cli.print_config {
            print!("{}", c.to_toml());
            return Ok(());
        }
        for p in execute(&c)? {
            eprintln!("wrote {}", p.display());
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kcsr: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_keys() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "model.kappa=30").unwrap();
        apply_override(&mut t, "rule=east").unwrap();
        apply_override(&mut t, "observables=[\"n\", \"Nadj\"]").unwrap();
        assert_eq!(t["model"]["kappa"].as_integer(), Some(30));
        assert_eq!(t["rule"].as_str(), Some("east"));
        assert_eq!(t["observables"].as_array().unwrap().len(), 2);
        assert!(apply_override(&mut t, "novalue").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::try_parse_from(["kcsr", "layers", "--seed", "7", "--set", "N=5", "--out-dir", "x"]).unwrap();
        let c = cli.config().unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.n_sites, Some(5));
        assert_eq!(c.output.out_dir, Some(PathBuf::from("x")));
        assert_eq!(c.subcommand, Some(Command::Layers));
    }
}
