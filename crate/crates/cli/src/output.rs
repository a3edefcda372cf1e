//! Deterministic CSV/JSON emission and the per-run manifest.

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// A CSV table held in memory until written.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Pretty JSON with sorted object keys and a trailing newline.
pub fn render_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    // `serde_json::Value` keeps objects in a BTreeMap, so keys come out sorted.
    let v = serde_json::to_value(value).map_err(|e| CliError::Io(format!("serialising output: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files of one run and writes them with a manifest.
pub struct Emitter {
    dir: PathBuf,
    prefix: String,
    files: BTreeMap<String, String>,
}

impl Emitter {
    pub fn new(dir: &Path, prefix: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            files: BTreeMap::new(),
        })
    }

    /// Writes `<prefix><suffix>` and records its checksum.
    pub fn write(&mut self, suffix: &str, contents: &str) -> Result<PathBuf, CliError> {
        let name = format!("{}{suffix}", self.prefix);
        let path = self.dir.join(&name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        self.files.insert(name, sha256_hex(contents.as_bytes()));
        Ok(path)
    }

    pub fn csv(&mut self, suffix: &str, table: &Table) -> Result<PathBuf, CliError> {
        self.write(suffix, &table.render())
    }

    pub fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write(suffix, &render_json(value)?)
    }

    /// Writes `<prefix>.manifest.json` and returns every path written.
    pub fn finish(self, config: &RunConfig, wall_clock: f64) -> Result<Vec<PathBuf>, CliError> {
        let manifest = json!({
            "toolkit_version": env!("CARGO_PKG_VERSION"),
            "config": serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?,
            "wall_clock_seconds": wall_clock,
            "outputs": self.files,
        });
        let name = format!("{}.manifest.json", self.prefix);
        let path = self.dir.join(&name);
        fs::write(&path, render_json(&manifest)?).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        let mut paths: Vec<PathBuf> = self.files.keys().map(|f| self.dir.join(f)).collect();
        paths.push(path);
        Ok(paths)
    }
}

/// Reads a manifest's `outputs` map.
pub fn manifest_checksums(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_value(v["outputs"].clone()).map_err(|e| CliError::Config(e.to_string()))
}
