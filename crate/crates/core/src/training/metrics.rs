use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::Algorithm;
use super::history::SolutionHistory;
use crate::neural::TreePolicy;

/// One line of the metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub algorithm: Algorithm,
    pub epoch: usize,
    /// Active curriculum levels.
    pub level: usize,
    pub levels_completed: usize,
    pub active: usize,
    /// Problems with a stored solution.
    pub solved_count: usize,
    /// Greedy success on this epoch's evaluation sample.
    pub eval_success: f64,
    /// Success of noisy sampled rollouts on the same sample, logged by
    /// the actor-critic baselines.
    pub eval_sampled: Option<f64>,
    /// Mean training loss over the epoch's updates; 0 without updates.
    pub loss: f64,
    pub updates: usize,
    pub episodes: usize,
    /// Stored solutions that failed to replay, when verified.
    pub history_invalid: Option<usize>,
    pub complete: bool,
    pub wall_time: f64,
}

/// What an observer sees after each epoch.
pub struct EpochView<'a, T> {
    pub metrics: &'a EpochMetrics,
    pub policy: &'a TreePolicy<T>,
    pub history: Option<&'a SolutionHistory>,
}

/// Appends metrics as JSON lines.
pub fn write_metrics_line<W: Write>(w: &mut W, m: &EpochMetrics) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, m)?;
    w.write_all(b"\n")
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub policy: TreePolicy<T>,
    pub history: SolutionHistory,
    pub metrics: Vec<EpochMetrics>,
}
