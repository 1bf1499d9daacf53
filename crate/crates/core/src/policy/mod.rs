//! Dual-head recurrent instruction-following agent: observation + instruction
//! + previous action in, action logits / class logits / progress out.

mod rollout;

pub use rollout::{greedy_rollout, write_trajectory, TrajStep};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expert::{EpisodeStep, VOCAB_SIZE};
use crate::gridsim::{NUM_ACTIONS, NUM_CLASSES, OBS_DIM};
use crate::nnkit::{NodeId, ParamSet, Tape};

/// Extra action-embedding row used as the start token at t = 0.
pub const START_ACTION: usize = NUM_ACTIONS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyConfig {
    pub hidden: usize,
    pub emb: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { hidden: 64, emb: 16 }
    }
}

/// Block ids into the flat `ParamSet`, fixed order for checkpoints.
#[derive(Debug, Clone, Copy)]
struct Ids {
    tok_emb: usize,
    act_emb: usize,
    w_in: usize,
    b_in: usize,
    w_z: usize,
    b_z: usize,
    w_r: usize,
    b_r: usize,
    w_h: usize,
    b_h: usize,
    w_a: usize,
    b_a: usize,
    w_c: usize,
    b_c: usize,
    w_p: usize,
    b_p: usize,
}

#[derive(Debug, Clone)]
pub struct Policy {
    pub cfg: PolicyConfig,
    pub ps: ParamSet,
    ids: Ids,
}

impl Policy {
    /// Fresh Xavier-uniform initialization (biases zero), deterministic per
    /// seed.
    pub fn new(cfg: PolicyConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let h = cfg.hidden;
        let e = cfg.emb;
        let in_dim = OBS_DIM + 2 * e;
        let mut mat = |ps: &mut ParamSet, name: &str, r: usize, c: usize| {
            let lim = (6.0 / (r + c) as f64).sqrt();
            ps.add(name, r, c, || rng.gen_range(-lim..lim))
        };
        let vec0 = |ps: &mut ParamSet, name: &str, n: usize| ps.add(name, n, 1, || 0.0);
        let ids = Ids {
            tok_emb: mat(&mut ps, "tok_emb", VOCAB_SIZE, e),
            act_emb: mat(&mut ps, "act_emb", NUM_ACTIONS + 1, e),
            w_in: mat(&mut ps, "w_in", h, in_dim),
            b_in: vec0(&mut ps, "b_in", h),
            w_z: mat(&mut ps, "w_z", h, 2 * h),
            b_z: vec0(&mut ps, "b_z", h),
            w_r: mat(&mut ps, "w_r", h, 2 * h),
            b_r: vec0(&mut ps, "b_r", h),
            w_h: mat(&mut ps, "w_h", h, 2 * h),
            b_h: vec0(&mut ps, "b_h", h),
            w_a: mat(&mut ps, "w_a", NUM_ACTIONS, h),
            b_a: vec0(&mut ps, "b_a", NUM_ACTIONS),
            w_c: mat(&mut ps, "w_c", NUM_CLASSES, h),
            b_c: vec0(&mut ps, "b_c", NUM_CLASSES),
            w_p: mat(&mut ps, "w_p", 1, h),
            b_p: vec0(&mut ps, "b_p", 1),
        };
        Policy { cfg, ps, ids }
    }

    /// Rebuild from a loaded `ParamSet`; shapes determine the config.
    pub fn from_params(ps: ParamSet) -> Result<Self> {
        let find = |name: &str| -> Result<usize> {
            ps.entries
                .iter()
                .position(|e| e.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("missing block {name}")))
        };
        let ids = Ids {
            tok_emb: find("tok_emb")?,
            act_emb: find("act_emb")?,
            w_in: find("w_in")?,
            b_in: find("b_in")?,
            w_z: find("w_z")?,
            b_z: find("b_z")?,
            w_r: find("w_r")?,
            b_r: find("b_r")?,
            w_h: find("w_h")?,
            b_h: find("b_h")?,
            w_a: find("w_a")?,
            b_a: find("b_a")?,
            w_c: find("w_c")?,
            b_c: find("b_c")?,
            w_p: find("w_p")?,
            b_p: find("b_p")?,
        };
        let (_, emb) = ps.shape(ids.tok_emb);
        let (hidden, _) = ps.shape(ids.b_in);
        let cfg = PolicyConfig { hidden, emb };
        if ps.shape(ids.w_a) != (NUM_ACTIONS, hidden) || ps.shape(ids.w_c) != (NUM_CLASSES, hidden)
        {
            return Err(Error::Checkpoint("head shapes inconsistent".to_string()));
        }
        Ok(Policy { cfg, ps, ids })
    }

    /// Mean-of-token-embedding weights over the vocabulary.
    fn instruction_weights(&self, instruction: &[u16]) -> Vec<f64> {
        let mut w = vec![0.0; VOCAB_SIZE];
        if instruction.is_empty() {
            return w;
        }
        let inv = 1.0 / instruction.len() as f64;
        for &t in instruction {
            w[t as usize] += inv;
        }
        w
    }
}

/// Per-step logits and progress nodes plus the tape that produced them.
pub struct EpisodeTape {
    pub tape: Tape,
    pub action_logits: Vec<NodeId>,
    pub class_logits: Vec<NodeId>,
    pub progress: Vec<NodeId>,
    pub final_hidden: NodeId,
}

/// Teacher-forced forward pass over a whole episode, on a fresh tape.
pub fn episode_forward(
    p: &Policy,
    instruction: &[u16],
    steps: &[EpisodeStep],
) -> Result<EpisodeTape> {
    let mut tape = Tape::new();
    let (action_logits, class_logits, progress, final_hidden) =
        forward_on_tape(p, &mut tape, instruction, steps)?;
    Ok(EpisodeTape {
        tape,
        action_logits,
        class_logits,
        progress,
        final_hidden,
    })
}

/// Teacher-forced forward pass on a caller-owned tape, so several episodes
/// can contribute to one batched loss. Returns per-step (action logits,
/// class logits, progress) node lists and the final hidden node.
#[allow(clippy::type_complexity)]
pub fn forward_on_tape(
    p: &Policy,
    tape: &mut Tape,
    instruction: &[u16],
    steps: &[EpisodeStep],
) -> Result<(Vec<NodeId>, Vec<NodeId>, Vec<NodeId>, NodeId)> {
    if steps.is_empty() {
        return Err(Error::EmptyInput("episode_forward: no steps".to_string()));
    }
    let ids = p.ids;
    let h_dim = p.cfg.hidden;

    let tok_emb = tape.param(&p.ps, ids.tok_emb);
    let act_emb = tape.param(&p.ps, ids.act_emb);
    let w_in = tape.param(&p.ps, ids.w_in);
    let b_in = tape.param(&p.ps, ids.b_in);
    let w_z = tape.param(&p.ps, ids.w_z);
    let b_z = tape.param(&p.ps, ids.b_z);
    let w_r = tape.param(&p.ps, ids.w_r);
    let b_r = tape.param(&p.ps, ids.b_r);
    let w_h = tape.param(&p.ps, ids.w_h);
    let b_h = tape.param(&p.ps, ids.b_h);
    let w_a = tape.param(&p.ps, ids.w_a);
    let b_a = tape.param(&p.ps, ids.b_a);
    let w_c = tape.param(&p.ps, ids.w_c);
    let b_c = tape.param(&p.ps, ids.b_c);
    let w_p = tape.param(&p.ps, ids.w_p);
    let b_p = tape.param(&p.ps, ids.b_p);

    let iw = tape.leaf(p.instruction_weights(instruction));
    let instr = tape.matvec_t(tok_emb, iw)?;

    let mut h = tape.leaf(vec![0.0; h_dim]);
    let mut action_logits = Vec::with_capacity(steps.len());
    let mut class_logits = Vec::with_capacity(steps.len());
    let mut progress = Vec::with_capacity(steps.len());

    for (t, s) in steps.iter().enumerate() {
        if s.features.len() != OBS_DIM {
            return Err(Error::ShapeMismatch(format!(
                "feature dim {} != {OBS_DIM}",
                s.features.len()
            )));
        }
        let prev = if t == 0 {
            START_ACTION
        } else {
            steps[t - 1].action.index()
        };
        let mut hot = vec![0.0; NUM_ACTIONS + 1];
        hot[prev] = 1.0;
        let hot = tape.leaf(hot);
        let prev_emb = tape.matvec_t(act_emb, hot)?;

        let feat = tape.leaf(s.features.clone());
        let x = tape.concat(&[feat, instr, prev_emb]);
        let u = tape.matvec(w_in, x)?;
        let u = tape.add(u, b_in)?;
        let u = tape.tanh(u);

        // GRU cell.
        let xh = tape.concat(&[u, h]);
        let z = tape.matvec(w_z, xh)?;
        let z = tape.add(z, b_z)?;
        let z = tape.sigmoid(z);
        let r = tape.matvec(w_r, xh)?;
        let r = tape.add(r, b_r)?;
        let r = tape.sigmoid(r);
        let rh = tape.mul(r, h)?;
        let xrh = tape.concat(&[u, rh]);
        let cand = tape.matvec(w_h, xrh)?;
        let cand = tape.add(cand, b_h)?;
        let cand = tape.tanh(cand);
        let keep = tape.affine(z, -1.0, 1.0);
        let kept = tape.mul(keep, h)?;
        let new = tape.mul(z, cand)?;
        h = tape.add(kept, new)?;

        let za = tape.matvec(w_a, h)?;
        let za = tape.add(za, b_a)?;
        let zc = tape.matvec(w_c, h)?;
        let zc = tape.add(zc, b_c)?;
        let yp = tape.matvec(w_p, h)?;
        let yp = tape.add(yp, b_p)?;
        let yp = tape.sigmoid(yp);
        action_logits.push(za);
        class_logits.push(zc);
        progress.push(yp);
    }
    Ok((action_logits, class_logits, progress, h))
}

/// Append the joint supervised loss terms for one episode to `terms`:
/// L = λa·Σt CE(action) + λc·Σt 1[interaction]·CE(class) + λp·(1/T)·Σt (p̂−p)².
/// With `per_step_mean`, the CE sums become means (action over T, class over
/// interaction count) to neutralize episode-length variance in batches.
#[allow(clippy::too_many_arguments)]
pub fn loss_terms(
    tape: &mut Tape,
    action_logits: &[NodeId],
    class_logits: &[NodeId],
    progress: &[NodeId],
    steps: &[EpisodeStep],
    lambda_a: f64,
    lambda_c: f64,
    lambda_p: f64,
    per_step_mean: bool,
    scale: f64,
    terms: &mut Vec<(NodeId, f64)>,
) -> Result<()> {
    let t_total = steps.len();
    let n_inter = steps.iter().filter(|s| s.action.interaction()).count();
    let wa = scale * lambda_a * if per_step_mean { 1.0 / t_total as f64 } else { 1.0 };
    let wc = scale
        * lambda_c
        * if per_step_mean && n_inter > 0 {
            1.0 / n_inter as f64
        } else {
            1.0
        };
    for (t, s) in steps.iter().enumerate() {
        let ce_a = tape.softmax_ce(action_logits[t], s.action.index())?;
        terms.push((ce_a, wa));
        if s.action.interaction() {
            let class = s.target_class.ok_or_else(|| {
                Error::ShapeMismatch(format!("interaction step {t} lacks class label"))
            })?;
            let ce_c = tape.softmax_ce(class_logits[t], class.index())?;
            terms.push((ce_c, wc));
        }
        let sq = tape.sq_diff(progress[t], vec![s.progress])?;
        terms.push((sq, scale * lambda_p / t_total as f64));
    }
    Ok(())
}

/// Single-episode joint loss node (see `loss_terms`).
pub fn supervised_loss_node(
    et: &mut EpisodeTape,
    steps: &[EpisodeStep],
    lambda_a: f64,
    lambda_c: f64,
    lambda_p: f64,
    per_step_mean: bool,
) -> Result<NodeId> {
    let mut terms = Vec::new();
    loss_terms(
        &mut et.tape,
        &et.action_logits,
        &et.class_logits,
        &et.progress,
        steps,
        lambda_a,
        lambda_c,
        lambda_p,
        per_step_mean,
        1.0,
        &mut terms,
    )?;
    et.tape.sum_weighted(&terms)
}

/// Forward + loss + gradients in one call (summed CE losses).
pub fn supervised_loss(
    p: &Policy,
    instruction: &[u16],
    steps: &[EpisodeStep],
    lambda_a: f64,
    lambda_c: f64,
    lambda_p: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut et = episode_forward(p, instruction, steps)?;
    let loss = supervised_loss_node(&mut et, steps, lambda_a, lambda_c, lambda_p, false)?;
    let grads = et.tape.backward(loss, &p.ps)?;
    Ok((et.tape.scalar(loss), grads))
}

/// Value-only teacher-forced outputs: per-step action logits, class logits
/// and progress. Matches `episode_forward` bit for bit.
#[allow(clippy::type_complexity)]
pub fn episode_outputs(
    p: &Policy,
    instruction: &[u16],
    steps: &[EpisodeStep],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
    let mut rt = RolloutState::new(p, instruction);
    let mut za_all = Vec::with_capacity(steps.len());
    let mut zc_all = Vec::with_capacity(steps.len());
    let mut prog = Vec::with_capacity(steps.len());
    let mut prev = START_ACTION;
    for s in steps {
        if s.features.len() != OBS_DIM {
            return Err(Error::ShapeMismatch(format!(
                "feature dim {} != {OBS_DIM}",
                s.features.len()
            )));
        }
        let (za, zc, p_hat) = rt.step(&s.features, prev);
        za_all.push(za);
        zc_all.push(zc);
        prog.push(p_hat);
        prev = s.action.index();
    }
    Ok((za_all, zc_all, prog))
}

/// Incremental value-only recurrent state, shared by teacher-forced
/// inference and greedy rollout.
pub struct RolloutState<'a> {
    p: &'a Policy,
    instr_enc: Vec<f64>,
    pub h: Vec<f64>,
}

impl<'a> RolloutState<'a> {
    pub fn new(p: &'a Policy, instruction: &[u16]) -> Self {
        let w = p.instruction_weights(instruction);
        let instr_enc = matvec_t(p.ps.slice(p.ids.tok_emb), VOCAB_SIZE, p.cfg.emb, &w);
        RolloutState {
            p,
            instr_enc,
            h: vec![0.0; p.cfg.hidden],
        }
    }

    /// One recurrent step; returns (action logits, class logits, progress).
    pub fn step(&mut self, features: &[f64], prev_action: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let p = self.p;
        let ids = p.ids;
        let h_dim = p.cfg.hidden;
        let e = p.cfg.emb;
        let act_row = &p.ps.slice(ids.act_emb)[prev_action * e..(prev_action + 1) * e];

        let mut x = Vec::with_capacity(OBS_DIM + 2 * e);
        x.extend_from_slice(features);
        x.extend_from_slice(&self.instr_enc);
        x.extend_from_slice(act_row);

        let in_dim = x.len();
        let mut u = matvec(p.ps.slice(ids.w_in), h_dim, in_dim, &x);
        add_in(&mut u, p.ps.slice(ids.b_in));
        u.iter_mut().for_each(|v| *v = v.tanh());

        let mut xh = Vec::with_capacity(2 * h_dim);
        xh.extend_from_slice(&u);
        xh.extend_from_slice(&self.h);
        let mut z = matvec(p.ps.slice(ids.w_z), h_dim, 2 * h_dim, &xh);
        add_in(&mut z, p.ps.slice(ids.b_z));
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut r = matvec(p.ps.slice(ids.w_r), h_dim, 2 * h_dim, &xh);
        add_in(&mut r, p.ps.slice(ids.b_r));
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut xrh = Vec::with_capacity(2 * h_dim);
        xrh.extend_from_slice(&u);
        xrh.extend(r.iter().zip(&self.h).map(|(ri, hi)| ri * hi));
        let mut cand = matvec(p.ps.slice(ids.w_h), h_dim, 2 * h_dim, &xrh);
        add_in(&mut cand, p.ps.slice(ids.b_h));
        cand.iter_mut().for_each(|v| *v = v.tanh());
        for i in 0..h_dim {
            self.h[i] = (1.0 - z[i]) * self.h[i] + z[i] * cand[i];
        }

        let mut za = matvec(p.ps.slice(ids.w_a), NUM_ACTIONS, h_dim, &self.h);
        add_in(&mut za, p.ps.slice(ids.b_a));
        let mut zc = matvec(p.ps.slice(ids.w_c), NUM_CLASSES, h_dim, &self.h);
        add_in(&mut zc, p.ps.slice(ids.b_c));
        let mut yp = matvec(p.ps.slice(ids.w_p), 1, h_dim, &self.h);
        add_in(&mut yp, p.ps.slice(ids.b_p));
        (za, zc, sigmoid(yp[0]))
    }
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| {
            w[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

fn matvec_t(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; cols];
    for r in 0..rows {
        let xr = x[r];
        if xr == 0.0 {
            continue;
        }
        for c in 0..cols {
            y[c] += w[r * cols + c] * xr;
        }
    }
    y
}

fn add_in(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Lowest-index argmax, fixed tie-break for determinism.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
