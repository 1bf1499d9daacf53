//! Evaluation (SR/GC), incremental-metric aggregation, experiment
//! orchestration and reporting.

mod report;
mod runner;

pub use report::{format_table, spearman, summarize, Summary, SummaryCell};
pub use runner::{evaluate_run, load_records, run_experiment, ExperimentConfig, OrderingSpec};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expert::{Episode, Split};
use crate::policy::{greedy_rollout, Policy};
use crate::streamgen::Setup;

/// Rollout step budget used for every evaluation.
pub const EVAL_BUDGET: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    pub split: Split,
    /// Per episode: (success, satisfied, total goal conditions).
    pub per_episode: Vec<(bool, usize, usize)>,
    pub sr: f64,
    pub gc: f64,
}

/// Greedy-rollout every episode's task from its initial state; SR is the
/// success fraction, GC the satisfied-condition fraction.
pub fn evaluate(policy: &Policy, episodes: &[Arc<Episode>], split: Split) -> Result<EvalResult> {
    if episodes.is_empty() {
        return Err(Error::EmptyInput("evaluate: no episodes".to_string()));
    }
    let mut per_episode = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let (_, success, (sat, total)) =
            greedy_rollout(policy, ep.layout.clone(), &ep.task, EVAL_BUDGET);
        per_episode.push((success, sat, total));
    }
    let (sr, gc) = sr_gc(&per_episode);
    Ok(EvalResult {
        split,
        per_episode,
        sr,
        gc,
    })
}

/// SR = successes / episodes; GC = satisfied conditions / total conditions.
pub fn sr_gc(per_episode: &[(bool, usize, usize)]) -> (f64, f64) {
    let successes = per_episode.iter().filter(|&&(s, _, _)| s).count();
    let sat: usize = per_episode.iter().map(|&(_, s, _)| s).sum();
    let total: usize = per_episode.iter().map(|&(_, _, t)| t).sum();
    (
        successes as f64 / per_episode.len() as f64,
        sat as f64 / total as f64,
    )
}

/// (A_last, A_avg) over per-checkpoint metric values.
pub fn aggregate_incremental(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput(
            "aggregate_incremental: no checkpoints".to_string(),
        ));
    }
    let last = *values.last().unwrap();
    let avg = values.iter().sum::<f64>() / values.len() as f64;
    Ok((last, avg))
}

/// One evaluation outcome per (run, task checkpoint, split).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub setup: Setup,
    pub ordering_id: String,
    pub seed: u64,
    pub task_index: usize,
    pub split: Split,
    pub sr: f64,
    pub gc: f64,
    pub wall_time_s: f64,
}
