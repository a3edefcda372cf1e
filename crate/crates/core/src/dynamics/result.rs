use serde::Serialize;
use std::collections::BTreeMap;

use super::model::TimeGrid;
use crate::spin::PureState;
use crate::stats::mean_sem;

/// Mean and standard error of one observable on the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
}

impl Series {
    /// Reduces per-trajectory rows `values[traj][grid]`.
    pub fn from_samples(values: &[Vec<f64>], n_points: usize) -> Self {
        let mut mean = Vec::with_capacity(n_points);
        let mut sem = Vec::with_capacity(n_points);
        let mut column = Vec::with_capacity(values.len());
        for i in 0..n_points {
            column.clear();
            column.extend(values.iter().map(|row| row[i]));
            let (m, s) = mean_sem(&column);
            mean.push(m);
            sem.push(s);
        }
        Self { mean, sem }
    }
}

/// Which grid points keep per-trajectory state snapshots.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Record {
    #[default]
    None,
    All,
    At(Vec<usize>),
}

impl Record {
    pub fn indices(&self, n_points: usize) -> Vec<usize> {
        match self {
            Record::None => Vec::new(),
            Record::All => (0..n_points).collect(),
            Record::At(ix) => ix.iter().copied().filter(|&i| i < n_points).collect(),
        }
    }
}

/// Trajectory-averaged observables.
#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub grid: TimeGrid,
    pub observables: BTreeMap<String, Series>,
    pub n_traj: usize,
    pub master_seed: u64,
    /// Grid indices at which snapshots were kept.
    pub snapshot_indices: Vec<usize>,
    /// `snapshots[traj][s]` is the normalized state at `snapshot_indices[s]`.
    pub snapshots: Vec<Vec<PureState>>,
    /// Total number of jumps summed over trajectories.
    pub jumps: usize,
}

impl TrajectoryResult {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.observables.get(name)
    }

    pub fn mean(&self, name: &str) -> &[f64] {
        &self.observables[name].mean
    }

    pub fn sem(&self, name: &str) -> &[f64] {
        &self.observables[name].sem
    }

    /// Snapshots of every trajectory at snapshot slot `s`.
    pub fn states_at(&self, s: usize) -> impl Iterator<Item = &PureState> {
        self.snapshots.iter().map(move |traj| &traj[s])
    }
}
