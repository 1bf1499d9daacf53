//! The per-episode training step for every method and the full continual
//! training loop over a benchmark stream.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridsim::{NUM_ACTIONS, NUM_CLASSES};
use crate::nnkit::{adam_step, lr_schedule, softmax, OptState, ParamSet, Tape};
use crate::policy::{
    argmax, episode_outputs, forward_on_tape, loss_terms, Policy, PolicyConfig,
};
use crate::streamgen::{stream, Benchmark, Ordering, StreamSample};

use super::{
    compute_gamma, push_confidences, reservoir_insert, update_logits_oriented, ConfidenceQueues,
    EpisodicMemory, MemoryEntry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Finetune,
    Er,
    EwcPp,
    DerPp,
    Cama,
    CamaFixed,
    Joint,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Finetune,
        Method::Er,
        Method::EwcPp,
        Method::DerPp,
        Method::Cama,
        Method::CamaFixed,
        Method::Joint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Finetune => "finetune",
            Method::Er => "er",
            Method::EwcPp => "ewcpp",
            Method::DerPp => "derpp",
            Method::Cama => "cama",
            Method::CamaFixed => "cama_fixed",
            Method::Joint => "joint",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }

    /// Methods whose loss uses replayed memory episodes.
    pub fn uses_memory(self) -> bool {
        matches!(
            self,
            Method::Er | Method::DerPp | Method::Cama | Method::CamaFixed
        )
    }

    /// Methods that distill against stored logits.
    pub fn distills(self) -> bool {
        matches!(self, Method::DerPp | Method::Cama | Method::CamaFixed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    /// Distillation weight on stored logits (both heads).
    pub distill_alpha: f64,
    /// Confidence-mixing ceilings.
    pub alpha_a: f64,
    pub alpha_c: f64,
    /// Confidence queue capacity N.
    pub queue_n: usize,
    /// Episodic memory capacity M.
    pub memory_size: usize,
    pub lambda_ewc: f64,
    pub fisher_decay: f64,
    /// Anchor refresh cadence in streamed episodes.
    pub anchor_every: u64,
    /// Batch composition: recent stream episodes + memory episodes.
    pub batch_stream: usize,
    pub batch_memory: usize,
    /// Joint upper bound only: shuffled epochs over the full training set.
    pub joint_epochs: usize,
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub lambda_p: f64,
    /// Auditable alternate reading that lets γ weight the old logits.
    pub legacy_gamma_orientation: bool,
    pub policy_hidden: usize,
    pub policy_emb: usize,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        MethodConfig {
            method,
            distill_alpha: 0.2,
            alpha_a: 0.99,
            alpha_c: 0.99,
            queue_n: 50,
            memory_size: 100,
            lambda_ewc: 10.0,
            fisher_decay: 0.9,
            anchor_every: 100,
            batch_stream: 4,
            batch_memory: 4,
            joint_epochs: 4,
            lambda_a: 1.0,
            lambda_c: 1.0,
            lambda_p: 1.0,
            legacy_gamma_orientation: false,
            policy_hidden: 64,
            policy_emb: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok01 = |v: f64| v > 0.0 && v < 1.0;
        if !ok01(self.alpha_a) || !ok01(self.alpha_c) {
            return Err(Error::InvalidConfig(
                "alpha_a and alpha_c must lie in (0, 1)".to_string(),
            ));
        }
        if self.memory_size < 1 || self.queue_n < 1 {
            return Err(Error::InvalidConfig("M and N must be >= 1".to_string()));
        }
        if self.batch_stream < 1 {
            return Err(Error::InvalidConfig("batch_stream must be >= 1".to_string()));
        }
        Ok(())
    }

    fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            hidden: self.policy_hidden,
            emb: self.policy_emb,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EwcState {
    pub fisher: Vec<f64>,
    pub anchor: Vec<f64>,
}

/// Everything a single continual run owns.
pub struct TrainerState {
    pub policy: Policy,
    pub opt: OptState,
    pub memory: EpisodicMemory,
    pub queues: ConfidenceQueues,
    pub recent: VecDeque<StreamSample>,
    pub ewc: Option<EwcState>,
    pub update_count: u64,
    /// Per-action-class correctness windows for the diagnostic trace.
    acc_window: Vec<VecDeque<bool>>,
}

impl TrainerState {
    pub fn new(cfg: &MethodConfig, init_seed: u64) -> Self {
        let policy = Policy::new(cfg.policy_config(), init_seed);
        let n = policy.ps.len();
        TrainerState {
            policy,
            opt: OptState::new(n),
            memory: EpisodicMemory::new(cfg.memory_size),
            queues: ConfidenceQueues::new(cfg.queue_n),
            recent: VecDeque::new(),
            ewc: if matches!(cfg.method, Method::EwcPp) {
                Some(EwcState {
                    fisher: vec![0.0; n],
                    anchor: vec![0.0; n],
                })
            } else {
                None
            },
            update_count: 0,
            acc_window: vec![VecDeque::new(); NUM_ACTIONS],
        }
    }
}

/// Per-update log line (JSON-lines friendly).
#[derive(Debug, Clone, Serialize)]
pub struct StepLog {
    pub stream_index: u64,
    pub loss_total: f64,
    pub loss_stream: f64,
    pub loss_memory: f64,
    pub loss_distill: f64,
    pub ewc_penalty: f64,
    pub gamma_a_mean: f64,
    pub gamma_a_max: f64,
    pub gamma_c_mean: f64,
    pub gamma_c_max: f64,
    pub memory_len: usize,
    pub skipped_memory: bool,
}

/// One diagnostic trace point per streamed episode: the current per-action
/// γ and the windowed teacher-forced accuracy per action class.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub stream_index: u64,
    pub gamma_a: Vec<f64>,
    pub acc_a: Vec<Option<f64>>,
}

fn interaction_class_logits(
    sample: &StreamSample,
    class_logits: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    sample
        .steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.action.interaction())
        .map(|(t, _)| class_logits[t].clone())
        .collect()
}

/// One update for one streamed episode. Carries no task identity.
pub fn train_step(
    cfg: &MethodConfig,
    st: &mut TrainerState,
    sample: StreamSample,
    rng: &mut ChaCha8Rng,
) -> Result<(StepLog, TraceEntry)> {
    let stream_index = st.memory.n + 1;

    // Pre-update stream logits: confidences, accuracy trace, insertion
    // logits.
    let (za, zc, _) = episode_outputs(&st.policy, &sample.instruction, &sample.steps)?;
    for (t, s) in sample.steps.iter().enumerate() {
        let w = &mut st.acc_window[s.action.index()];
        if w.len() == cfg.queue_n {
            w.pop_front();
        }
        w.push_back(argmax(&za[t]) == s.action.index());
    }

    let gammas = match cfg.method {
        Method::Cama => {
            push_confidences(&mut st.queues, &za, &zc, &sample.steps);
            Some(compute_gamma(&st.queues, cfg.alpha_a, cfg.alpha_c))
        }
        Method::CamaFixed => Some((
            vec![cfg.alpha_a; NUM_ACTIONS],
            vec![cfg.alpha_c; NUM_CLASSES],
        )),
        _ => None,
    };

    st.recent.push_back(sample.clone());
    while st.recent.len() > cfg.batch_stream {
        st.recent.pop_front();
    }

    // Memory batch (uniform with replacement).
    let skipped_memory = cfg.method.uses_memory() && st.memory.is_empty();
    let mem_idx: Vec<usize> = if cfg.method.uses_memory() && !st.memory.is_empty() {
        (0..cfg.batch_memory)
            .map(|_| rng.gen_range(0..st.memory.len()))
            .collect()
    } else {
        Vec::new()
    };

    // Confidence-aware methods refresh stored logits for the retrieved
    // entries before they are used as distillation targets.
    if let Some((ga, gc)) = &gammas {
        let mut done: Vec<usize> = Vec::new();
        for &i in &mem_idx {
            if done.contains(&i) {
                continue;
            }
            done.push(i);
            let entry = &st.memory.entries[i];
            let (cur_a, cur_c, _) =
                episode_outputs(&st.policy, &entry.sample.instruction, &entry.sample.steps)?;
            let cur_c = interaction_class_logits(&entry.sample, &cur_c);
            let entry = &mut st.memory.entries[i];
            for (old, cur) in entry.action_logits.iter_mut().zip(&cur_a) {
                *old = update_logits_oriented(old, cur, ga, cfg.legacy_gamma_orientation)?;
            }
            for (old, cur) in entry.class_logits.iter_mut().zip(&cur_c) {
                *old = update_logits_oriented(old, cur, gc, cfg.legacy_gamma_orientation)?;
            }
        }
    }

    // Batched loss on one tape; per-timestep means neutralize length
    // variance.
    let mut tape = Tape::new();
    let mut stream_terms = Vec::new();
    let n_stream = st.recent.len();
    for s in &st.recent {
        let (al, cl, pr, _) = forward_on_tape(&st.policy, &mut tape, &s.instruction, &s.steps)?;
        loss_terms(
            &mut tape,
            &al,
            &cl,
            &pr,
            &s.steps,
            cfg.lambda_a,
            cfg.lambda_c,
            cfg.lambda_p,
            true,
            1.0 / n_stream as f64,
            &mut stream_terms,
        )?;
    }

    let mut memory_terms = Vec::new();
    let mut distill_terms = Vec::new();
    for &i in &mem_idx {
        let entry = &st.memory.entries[i];
        let s = entry.sample.clone();
        let (al, cl, pr, _) = forward_on_tape(&st.policy, &mut tape, &s.instruction, &s.steps)?;
        loss_terms(
            &mut tape,
            &al,
            &cl,
            &pr,
            &s.steps,
            cfg.lambda_a,
            cfg.lambda_c,
            cfg.lambda_p,
            true,
            1.0 / mem_idx.len() as f64,
            &mut memory_terms,
        )?;
        if cfg.method.distills() {
            let entry = &st.memory.entries[i];
            let t_total = s.steps.len();
            let n_inter = entry.class_logits.len();
            let wa = cfg.distill_alpha / (t_total as f64 * mem_idx.len() as f64);
            for (t, stored) in entry.action_logits.iter().enumerate() {
                let sq = tape.sq_diff(al[t], stored.clone())?;
                distill_terms.push((sq, wa));
            }
            if n_inter > 0 {
                let wc = cfg.distill_alpha / (n_inter as f64 * mem_idx.len() as f64);
                let mut k = 0;
                for (t, step) in s.steps.iter().enumerate() {
                    if step.action.interaction() {
                        let sq = tape.sq_diff(cl[t], entry.class_logits[k].clone())?;
                        distill_terms.push((sq, wc));
                        k += 1;
                    }
                }
            }
        }
    }

    let loss_stream_node = tape.sum_weighted(&stream_terms)?;
    let loss_memory_node = tape.sum_weighted(&memory_terms)?;
    let loss_distill_node = tape.sum_weighted(&distill_terms)?;
    let total = tape.sum_weighted(&[
        (loss_stream_node, 1.0),
        (loss_memory_node, 1.0),
        (loss_distill_node, 1.0),
    ])?;
    let mut grads = tape.backward(total, &st.policy.ps)?;

    // EWC++: decayed Fisher from the data-term gradients, quadratic pull to
    // the anchor.
    let mut ewc_penalty = 0.0;
    if let Some(ewc) = st.ewc.as_mut() {
        for (f, g) in ewc.fisher.iter_mut().zip(&grads) {
            *f = cfg.fisher_decay * *f + (1.0 - cfg.fisher_decay) * g * g;
        }
        if cfg.lambda_ewc != 0.0 {
            let theta = &st.policy.ps.data;
            for i in 0..grads.len() {
                let d = theta[i] - ewc.anchor[i];
                ewc_penalty += cfg.lambda_ewc * ewc.fisher[i] * d * d;
                grads[i] += 2.0 * cfg.lambda_ewc * ewc.fisher[i] * d;
            }
        }
    }

    let lr = lr_schedule(st.update_count);
    adam_step(&mut st.policy.ps.data, &grads, &mut st.opt, lr);
    st.update_count += 1;

    if let Some(ewc) = st.ewc.as_mut() {
        if stream_index.is_multiple_of(cfg.anchor_every) {
            ewc.anchor.copy_from_slice(&st.policy.ps.data);
        }
    }

    // Every method maintains the reservoir (uniform rng consumption keeps
    // method comparisons seed-aligned); logit-carrying methods store the
    // pre-update logits.
    let entry = MemoryEntry::new(
        sample.clone(),
        za.clone(),
        interaction_class_logits(&sample, &zc),
        stream_index,
    )?;
    reservoir_insert(&mut st.memory, entry, rng);

    let (ga, gc) = gammas.unwrap_or_else(|| (vec![0.0; NUM_ACTIONS], vec![0.0; NUM_CLASSES]));
    let summary = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let max = v.iter().cloned().fold(0.0_f64, f64::max);
        (mean, max)
    };
    let (gam, gax) = summary(&ga);
    let (gcm, gcx) = summary(&gc);
    let log = StepLog {
        stream_index,
        loss_total: tape.scalar(total),
        loss_stream: tape.scalar(loss_stream_node),
        loss_memory: tape.scalar(loss_memory_node),
        loss_distill: tape.scalar(loss_distill_node),
        ewc_penalty,
        gamma_a_mean: gam,
        gamma_a_max: gax,
        gamma_c_mean: gcm,
        gamma_c_max: gcx,
        memory_len: st.memory.len(),
        skipped_memory,
    };
    let trace = TraceEntry {
        stream_index,
        gamma_a: ga,
        acc_a: st
            .acc_window
            .iter()
            .map(|w| {
                if w.is_empty() {
                    None
                } else {
                    Some(w.iter().filter(|&&b| b).count() as f64 / w.len() as f64)
                }
            })
            .collect(),
    };
    Ok((log, trace))
}

/// A finished continual run: one checkpoint per completed task (a single
/// final checkpoint for the joint upper bound), step logs and the
/// confidence/accuracy trace.
pub struct RunOutput {
    pub checkpoints: Vec<ParamSet>,
    pub logs: Vec<StepLog>,
    pub trace: Vec<TraceEntry>,
}

/// Consume the benchmark stream once (one update per streamed episode) and
/// checkpoint at each task boundary. Boundaries schedule checkpoints only;
/// they are never passed into `train_step`.
pub fn run_continual_training(
    cfg: &MethodConfig,
    benchmark: &Benchmark,
    ordering: &Ordering,
    seed: u64,
) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.method == Method::Joint {
        return run_joint(cfg, benchmark, seed);
    }
    let mut st = TrainerState::new(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7261_696e);
    let (samples, boundaries) = stream(benchmark, ordering)?;

    let mut checkpoints = Vec::new();
    let mut logs = Vec::new();
    let mut trace = Vec::new();
    let mut next_boundary = 0usize;
    for (i, sample) in samples.enumerate() {
        let (log, tr) = train_step(cfg, &mut st, sample, &mut rng)?;
        logs.push(log);
        trace.push(tr);
        while next_boundary < boundaries.len() && i + 1 == boundaries[next_boundary] {
            checkpoints.push(st.policy.ps.clone());
            next_boundary += 1;
        }
    }
    Ok(RunOutput {
        checkpoints,
        logs,
        trace,
    })
}

/// Multi-epoch shuffled training over the union of all task data (upper
/// bound); emits a single final checkpoint.
fn run_joint(cfg: &MethodConfig, benchmark: &Benchmark, seed: u64) -> Result<RunOutput> {
    let mut st = TrainerState::new(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a6f_696e);
    let all: Vec<Arc<crate::expert::Episode>> = benchmark
        .task_groups
        .iter()
        .flat_map(|(_, g)| g.iter().cloned())
        .collect();
    if all.is_empty() {
        return Err(Error::EmptyInput("joint: no training episodes".to_string()));
    }
    let batch = cfg.batch_stream + cfg.batch_memory;
    let mut logs = Vec::new();
    for _ in 0..cfg.joint_epochs {
        let mut order: Vec<usize> = (0..all.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut tape = Tape::new();
            let mut terms = Vec::new();
            for &i in chunk {
                let ep = &all[i];
                let (al, cl, pr, _) =
                    forward_on_tape(&st.policy, &mut tape, &ep.instruction, &ep.steps)?;
                loss_terms(
                    &mut tape,
                    &al,
                    &cl,
                    &pr,
                    &ep.steps,
                    cfg.lambda_a,
                    cfg.lambda_c,
                    cfg.lambda_p,
                    true,
                    1.0 / chunk.len() as f64,
                    &mut terms,
                )?;
            }
            let total = tape.sum_weighted(&terms)?;
            let grads = tape.backward(total, &st.policy.ps)?;
            let lr = lr_schedule(st.update_count);
            adam_step(&mut st.policy.ps.data, &grads, &mut st.opt, lr);
            st.update_count += 1;
            logs.push(StepLog {
                stream_index: st.update_count,
                loss_total: tape.scalar(total),
                loss_stream: tape.scalar(total),
                loss_memory: 0.0,
                loss_distill: 0.0,
                ewc_penalty: 0.0,
                gamma_a_mean: 0.0,
                gamma_a_max: 0.0,
                gamma_c_mean: 0.0,
                gamma_c_max: 0.0,
                memory_len: 0,
                skipped_memory: false,
            });
        }
    }
    Ok(RunOutput {
        checkpoints: vec![st.policy.ps.clone()],
        logs,
        trace: Vec::new(),
    })
}

/// Softmax confidence of the ground-truth entry (the score the queues
/// store).
pub fn gt_confidence(logits: &[f64], gt: usize) -> f64 {
    softmax(logits)[gt]
}
