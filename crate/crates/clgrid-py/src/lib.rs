//! Python bindings for the clgrid core: benchmark construction, policy
//! training and evaluation, plus the confidence-aware logit-update
//! primitives for quick experimentation from notebooks.

// The pyo3 attribute macros expand to PyErr-to-PyErr conversions that trip
// this lint.
#![allow(clippy::useless_conversion)]

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use clgrid::bench::{evaluate, evaluate_run, spearman as spearman_rs};
use clgrid::clmethods::{
    gamma_scalar, run_continual_training, update_logits_oriented, Method, MethodConfig,
};
use clgrid::expert::Split;
use clgrid::nnkit::{load_checkpoint, save_checkpoint};
use clgrid::policy::{greedy_rollout, PolicyConfig};
use clgrid::streamgen::{
    build_benchmark, make_task_ordering, BenchmarkCounts, OrderingSource, Setup, TaskKey,
};

fn err(e: clgrid::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_setup(s: &str) -> PyResult<Setup> {
    match s {
        "behavior" => Ok(Setup::BehaviorIl),
        "environment" => Ok(Setup::EnvironmentIl),
        other => Err(PyValueError::new_err(format!(
            "unknown setup '{other}' (behavior|environment)"
        ))),
    }
}

fn parse_split(s: &str) -> PyResult<Split> {
    match s {
        "valid_seen" => Ok(Split::ValidSeen),
        "valid_unseen" => Ok(Split::ValidUnseen),
        other => Err(PyValueError::new_err(format!(
            "unknown split '{other}' (valid_seen|valid_unseen)"
        ))),
    }
}

/// A generated benchmark: per-task expert demonstrations plus seen/unseen
/// validation sets.
#[pyclass(name = "Benchmark")]
struct PyBenchmark {
    inner: Arc<clgrid::streamgen::Benchmark>,
}

#[pymethods]
impl PyBenchmark {
    #[new]
    #[pyo3(signature = (setup="behavior", train=300, valid_seen=30, valid_unseen=30, seed=0, balance=true))]
    fn new(
        setup: &str,
        train: usize,
        valid_seen: usize,
        valid_unseen: usize,
        seed: u64,
        balance: bool,
    ) -> PyResult<Self> {
        let setup = parse_setup(setup)?;
        let mut counts = BenchmarkCounts::uniform(train, valid_seen, valid_unseen);
        counts.balance = balance;
        let b = build_benchmark(setup, counts, seed).map_err(err)?;
        Ok(PyBenchmark { inner: Arc::new(b) })
    }

    fn task_labels(&self) -> Vec<String> {
        self.inner
            .task_groups
            .iter()
            .map(|(k, _)| k.label())
            .collect()
    }

    fn train_counts(&self) -> Vec<usize> {
        self.inner.task_groups.iter().map(|(_, g)| g.len()).collect()
    }

    fn setup(&self) -> &'static str {
        match self.inner.setup {
            Setup::BehaviorIl => "behavior",
            Setup::EnvironmentIl => "environment",
        }
    }

    /// Instruction of one training episode, as a whitespace-joined string.
    fn instruction(&self, task_index: usize, episode_index: usize) -> PyResult<String> {
        let (_, group) = self
            .inner
            .task_groups
            .get(task_index)
            .ok_or_else(|| PyValueError::new_err("task_index out of range"))?;
        let ep = group
            .get(episode_index)
            .ok_or_else(|| PyValueError::new_err("episode_index out of range"))?;
        Ok(ep
            .instruction
            .iter()
            .map(|&t| clgrid::expert::VOCAB[t as usize])
            .collect::<Vec<_>>()
            .join(" "))
    }

    fn __repr__(&self) -> String {
        format!(
            "Benchmark(setup='{}', tasks={}, train_episodes={})",
            self.setup(),
            self.inner.task_groups.len(),
            self.train_counts().iter().sum::<usize>(),
        )
    }
}

/// Dual-head recurrent policy with a flat parameter vector.
#[pyclass(name = "Policy")]
struct PyPolicy {
    inner: clgrid::policy::Policy,
}

#[pymethods]
impl PyPolicy {
    #[new]
    #[pyo3(signature = (hidden=64, emb=16, seed=0))]
    fn new(hidden: usize, emb: usize, seed: u64) -> Self {
        PyPolicy {
            inner: clgrid::policy::Policy::new(PolicyConfig { hidden, emb }, seed),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ps = load_checkpoint(&path).map_err(err)?;
        Ok(PyPolicy {
            inner: clgrid::policy::Policy::from_params(ps).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&path, &self.inner.ps).map_err(err)
    }

    fn num_params(&self) -> usize {
        self.inner.ps.len()
    }

    /// (success rate, goal-condition rate) over a full validation split.
    fn evaluate(&self, benchmark: &PyBenchmark, split: &str) -> PyResult<(f64, f64)> {
        let split = parse_split(split)?;
        let groups = match split {
            Split::ValidSeen => &benchmark.inner.valid_seen,
            Split::ValidUnseen => &benchmark.inner.valid_unseen,
            Split::Train => unreachable!(),
        };
        let episodes: Vec<_> = groups.iter().flat_map(|(_, g)| g.iter().cloned()).collect();
        let ev = evaluate(&self.inner, &episodes, split).map_err(err)?;
        Ok((ev.sr, ev.gc))
    }

    /// Greedy rollout on one validation episode; returns (success, satisfied,
    /// total, action names).
    fn rollout(
        &self,
        benchmark: &PyBenchmark,
        split: &str,
        task_index: usize,
        episode_index: usize,
    ) -> PyResult<(bool, usize, usize, Vec<String>)> {
        let split = parse_split(split)?;
        let groups = match split {
            Split::ValidSeen => &benchmark.inner.valid_seen,
            Split::ValidUnseen => &benchmark.inner.valid_unseen,
            Split::Train => unreachable!(),
        };
        let (_, group) = groups
            .get(task_index)
            .ok_or_else(|| PyValueError::new_err("task_index out of range"))?;
        let ep = group
            .get(episode_index)
            .ok_or_else(|| PyValueError::new_err("episode_index out of range"))?;
        let (traj, success, (sat, total)) =
            greedy_rollout(&self.inner, ep.layout.clone(), &ep.task, 100);
        let actions = traj.iter().map(|s| format!("{:?}", s.action)).collect();
        Ok((success, sat, total, actions))
    }

    fn __repr__(&self) -> String {
        format!("Policy(params={})", self.inner.ps.len())
    }
}

/// One evaluation outcome: a (task checkpoint, split) cell of a run.
#[pyclass(name = "Record")]
#[derive(Clone)]
struct PyRecord {
    #[pyo3(get)]
    method: String,
    #[pyo3(get)]
    task_index: usize,
    #[pyo3(get)]
    split: String,
    #[pyo3(get)]
    sr: f64,
    #[pyo3(get)]
    gc: f64,
}

#[pymethods]
impl PyRecord {
    fn __repr__(&self) -> String {
        format!(
            "Record(method='{}', task_index={}, split='{}', sr={:.3}, gc={:.3})",
            self.method, self.task_index, self.split, self.sr, self.gc
        )
    }
}

/// Run one continual (or joint) training run and evaluate every checkpoint.
/// Returns (final policy, records).
#[pyfunction]
#[pyo3(signature = (benchmark, method="cama", seed=0, ordering=0, memory_size=None, alpha=None))]
fn train_run(
    benchmark: &PyBenchmark,
    method: &str,
    seed: u64,
    ordering: usize,
    memory_size: Option<usize>,
    alpha: Option<f64>,
) -> PyResult<(PyPolicy, Vec<PyRecord>)> {
    let method = Method::parse(method).map_err(err)?;
    let mut cfg = MethodConfig::new(method);
    if let Some(m) = memory_size {
        cfg.memory_size = m;
    }
    if let Some(a) = alpha {
        cfg.distill_alpha = a;
    }
    let ord = make_task_ordering(benchmark.inner.setup, OrderingSource::Preset(ordering))
        .map_err(err)?;
    let out = run_continual_training(&cfg, &benchmark.inner, &ord, seed).map_err(err)?;
    let label: Vec<String> = ord.sequence.iter().map(TaskKey::label).collect();
    let records = evaluate_run(
        &benchmark.inner,
        &ord,
        method,
        &out,
        &label.join(","),
        seed,
        0.0,
    )
    .map_err(err)?;
    let policy = clgrid::policy::Policy::from_params(out.checkpoints.last().unwrap().clone())
        .map_err(err)?;
    let records = records
        .into_iter()
        .map(|r| PyRecord {
            method: r.method,
            task_index: r.task_index,
            split: match r.split {
                Split::ValidSeen => "valid_seen".to_string(),
                Split::ValidUnseen => "valid_unseen".to_string(),
                Split::Train => "train".to_string(),
            },
            sr: r.sr,
            gc: r.gc,
        })
        .collect();
    Ok((PyPolicy { inner: policy }, records))
}

/// Componentwise convex logit mix: new = (1 - gamma) * old + gamma * current
/// (legacy=True flips the orientation).
#[pyfunction]
#[pyo3(signature = (old, current, gamma, legacy=false))]
fn update_logits(
    old: Vec<f64>,
    current: Vec<f64>,
    gamma: Vec<f64>,
    legacy: bool,
) -> PyResult<Vec<f64>> {
    update_logits_oriented(&old, &current, &gamma, legacy).map_err(err)
}

/// Mixing coefficient from a confidence history: alpha * clip(mean - floor,
/// 0, 1); empty history gives 0.
#[pyfunction]
fn gamma(confidences: Vec<f64>, alpha: f64, floor: f64) -> f64 {
    gamma_scalar(confidences.into_iter(), alpha, floor)
}

/// Spearman rank correlation with average-tie ranks.
#[pyfunction]
fn spearman(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(PyValueError::new_err(
            "spearman needs two equal-length series with >= 2 points",
        ));
    }
    Ok(spearman_rs(&xs, &ys))
}

#[pymodule]
fn clgrid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBenchmark>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyRecord>()?;
    m.add_function(wrap_pyfunction!(train_run, m)?)?;
    m.add_function(wrap_pyfunction!(update_logits, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add("NUM_ACTIONS", clgrid::gridsim::NUM_ACTIONS)?;
    m.add("NUM_CLASSES", clgrid::gridsim::NUM_CLASSES)?;
    m.add("VOCAB_SIZE", clgrid::expert::VOCAB_SIZE)?;
    Ok(())
}
