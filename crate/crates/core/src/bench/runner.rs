//! Experiment orchestration: benchmark construction, parallel dispatch of
//! (method, ordering, seed) runs and crash-safe append-only results.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clmethods::{run_continual_training, Method, MethodConfig, RunOutput};
use crate::error::{Error, Result};
use crate::expert::{Episode, Split};
use crate::nnkit::save_checkpoint;
use crate::streamgen::{
    build_benchmark, make_task_ordering, Benchmark, BenchmarkCounts, Ordering, OrderingSource,
    Setup, TaskKey,
};

use super::{evaluate, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingSpec {
    Preset(usize),
    Seeded(u64),
}

impl OrderingSpec {
    pub fn id(&self) -> String {
        match self {
            OrderingSpec::Preset(i) => format!("preset{i}"),
            OrderingSpec::Seeded(s) => format!("seeded{s}"),
        }
    }

    pub fn resolve(&self, setup: Setup) -> Result<Ordering> {
        match *self {
            OrderingSpec::Preset(i) => make_task_ordering(setup, OrderingSource::Preset(i)),
            OrderingSpec::Seeded(s) => make_task_ordering(setup, OrderingSource::Seeded(s)),
        }
    }
}

/// Experiment description, loadable from JSON. Unknown keys are rejected at
/// startup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub orderings: Vec<OrderingSpec>,
    pub counts: BenchmarkCounts,
    pub benchmark_seed: u64,
    /// Parallel run workers.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub memory_size: Option<usize>,
    #[serde(default)]
    pub distill_alpha: Option<f64>,
    #[serde(default)]
    pub alpha_a: Option<f64>,
    #[serde(default)]
    pub alpha_c: Option<f64>,
    #[serde(default)]
    pub queue_n: Option<usize>,
    #[serde(default)]
    pub joint_epochs: Option<usize>,
    #[serde(default)]
    pub policy_hidden: Option<usize>,
    #[serde(default)]
    pub policy_emb: Option<usize>,
    /// Write per-task checkpoints to disk (final one per run otherwise).
    #[serde(default)]
    pub save_checkpoints: bool,
}

fn default_workers() -> usize {
    4
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.seeds.is_empty() || self.orderings.is_empty() {
            return Err(Error::InvalidConfig(
                "methods, seeds and orderings must be non-empty".to_string(),
            ));
        }
        for m in &self.methods {
            Method::parse(m)?;
        }
        Ok(())
    }

    pub fn method_config(&self, method: Method) -> MethodConfig {
        let mut cfg = MethodConfig::new(method);
        if let Some(v) = self.memory_size {
            cfg.memory_size = v;
        }
        if let Some(v) = self.distill_alpha {
            cfg.distill_alpha = v;
        }
        if let Some(v) = self.alpha_a {
            cfg.alpha_a = v;
        }
        if let Some(v) = self.alpha_c {
            cfg.alpha_c = v;
        }
        if let Some(v) = self.queue_n {
            cfg.queue_n = v;
        }
        if let Some(v) = self.joint_epochs {
            cfg.joint_epochs = v;
        }
        if let Some(v) = self.policy_hidden {
            cfg.policy_hidden = v;
        }
        if let Some(v) = self.policy_emb {
            cfg.policy_emb = v;
        }
        cfg
    }
}

/// Validation episodes for the tasks learned up to checkpoint j (inclusive),
/// following the ordering.
fn cumulative_valid(
    groups: &[(TaskKey, Vec<Arc<Episode>>)],
    ordering: &Ordering,
    upto: usize,
) -> Vec<Arc<Episode>> {
    let mut out = Vec::new();
    for key in ordering.sequence.iter().take(upto + 1) {
        if let Some((_, g)) = groups.iter().find(|(k, _)| k == key) {
            out.extend(g.iter().cloned());
        }
    }
    out
}

/// Evaluate every checkpoint of a finished run on the cumulative seen and
/// unseen validation sets. Joint runs evaluate their single checkpoint on
/// the full sets at the final task index.
pub fn evaluate_run(
    benchmark: &Benchmark,
    ordering: &Ordering,
    method: Method,
    out: &RunOutput,
    ordering_id: &str,
    seed: u64,
    wall_time_s: f64,
) -> Result<Vec<RunRecord>> {
    let n_tasks = ordering.sequence.len();
    let mut records = Vec::new();
    let task_indices: Vec<usize> = if method == Method::Joint {
        vec![n_tasks - 1]
    } else {
        (0..n_tasks).collect()
    };
    for (ci, &task_index) in task_indices.iter().enumerate() {
        let policy = crate::policy::Policy::from_params(out.checkpoints[ci].clone())?;
        for (split, groups) in [
            (Split::ValidSeen, &benchmark.valid_seen),
            (Split::ValidUnseen, &benchmark.valid_unseen),
        ] {
            let episodes = cumulative_valid(groups, ordering, task_index);
            let ev = evaluate(&policy, &episodes, split)?;
            records.push(RunRecord {
                method: method.name().to_string(),
                setup: benchmark.setup,
                ordering_id: ordering_id.to_string(),
                seed,
                task_index,
                split,
                sr: ev.sr,
                gc: ev.gc,
                wall_time_s,
            });
        }
    }
    Ok(records)
}

/// Run the full methods x orderings x seeds grid against one benchmark.
/// Records are appended to `<out_dir>/results.jsonl` as runs finish; the
/// final checkpoint of each run is written next to it.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let benchmark = Arc::new(build_benchmark(
        cfg.setup,
        cfg.counts.clone(),
        cfg.benchmark_seed,
    )?);

    let results_path = out_dir.join("results.jsonl");
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)?;
    let mut file = file;
    if file.metadata()?.len() == 0 {
        writeln!(file, "{{\"schema\":\"{RESULTS_SCHEMA}\"}}")?;
    }
    let sink = Mutex::new(file);

    let mut jobs = Vec::new();
    for m in &cfg.methods {
        let method = Method::parse(m)?;
        for spec in &cfg.orderings {
            for &seed in &cfg.seeds {
                jobs.push((method, *spec, seed));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(method, spec, seed)| -> Result<()> {
                let ordering = spec.resolve(cfg.setup)?;
                let mcfg = cfg.method_config(method);
                let started = Instant::now();
                let out = run_continual_training(&mcfg, &benchmark, &ordering, seed)?;
                let wall = started.elapsed().as_secs_f64();
                let records =
                    evaluate_run(&benchmark, &ordering, method, &out, &spec.id(), seed, wall)?;

                let run_tag = format!("{}_{}_s{}", method.name(), spec.id(), seed);
                let ckpt = out_dir.join(format!("{run_tag}.ckpt"));
                save_checkpoint(&ckpt, out.checkpoints.last().unwrap())?;
                if !out.trace.is_empty() {
                    let mut w = std::io::BufWriter::new(File::create(
                        out_dir.join(format!("{run_tag}_trace.jsonl")),
                    )?);
                    for tr in &out.trace {
                        serde_json::to_writer(&mut w, tr)?;
                        writeln!(w)?;
                    }
                }

                let mut sink = sink.lock().unwrap();
                for r in &records {
                    let line = serde_json::to_string(r)?;
                    writeln!(sink, "{line}")?;
                }
                sink.flush()?;
                Ok(())
            })
            .collect::<Result<Vec<()>>>()
    })?;
    Ok(results_path)
}

/// Results file schema tag (first line of every fresh results file).
pub const RESULTS_SCHEMA: &str = "run-records/v1";

/// Read RunRecords back from a JSON-lines results file; schema header lines
/// are verified and skipped.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)?;
        if let Some(schema) = v.get("schema") {
            if schema != RESULTS_SCHEMA {
                return Err(Error::InvalidConfig(format!(
                    "unsupported results schema {schema} in {}",
                    path.display()
                )));
            }
            continue;
        }
        out.push(serde_json::from_value(v)?);
    }
    Ok(out)
}
