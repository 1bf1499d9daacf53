//! Confidence queues, the per-class mixing coefficients and the
//! moving-average logit update.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::expert::EpisodeStep;
use crate::gridsim::{NUM_ACTIONS, NUM_CLASSES};
use crate::nnkit::softmax;

/// N-recent ground-truth confidence scores, one ring buffer per action and
/// per object class.
#[derive(Debug, Clone)]
pub struct ConfidenceQueues {
    pub action: Vec<VecDeque<f64>>,
    pub class: Vec<VecDeque<f64>>,
    pub capacity: usize,
}

impl ConfidenceQueues {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        ConfidenceQueues {
            action: vec![VecDeque::with_capacity(capacity); NUM_ACTIONS],
            class: vec![VecDeque::with_capacity(capacity); NUM_CLASSES],
            capacity,
        }
    }

    fn push(queue: &mut VecDeque<f64>, capacity: usize, v: f64) {
        if queue.len() == capacity {
            queue.pop_front();
        }
        queue.push_back(v);
    }
}

/// Push ground-truth softmax confidences from a pre-update forward pass on
/// the streamed episode: softmax(z_a)[gt action] per step, and at
/// interaction steps softmax(z_c)[gt class].
pub fn push_confidences(
    queues: &mut ConfidenceQueues,
    action_logits: &[Vec<f64>],
    class_logits: &[Vec<f64>],
    steps: &[EpisodeStep],
) {
    let cap = queues.capacity;
    for (t, s) in steps.iter().enumerate() {
        let pa = softmax(&action_logits[t]);
        ConfidenceQueues::push(&mut queues.action[s.action.index()], cap, pa[s.action.index()]);
        if let Some(c) = s.target_class {
            let pc = softmax(&class_logits[t]);
            ConfidenceQueues::push(&mut queues.class[c.index()], cap, pc[c.index()]);
        }
    }
}

/// Scalar mixing coefficient for one confidence history: α · CLIP(mean −
/// floor, 0, 1); an empty history yields 0.
pub fn gamma_scalar(mean_iter: impl ExactSizeIterator<Item = f64>, alpha: f64, floor: f64) -> f64 {
    let n = mean_iter.len();
    if n == 0 {
        return 0.0;
    }
    let mean = mean_iter.sum::<f64>() / n as f64;
    alpha * (mean - floor).clamp(0.0, 1.0)
}

fn gamma_of(queue: &VecDeque<f64>, alpha: f64, floor: f64) -> f64 {
    gamma_scalar(queue.iter().copied(), alpha, floor)
}

/// Per-class mixing coefficients: α · CLIP(queue mean − uniform floor, 0, 1);
/// empty queue → 0.
pub fn compute_gamma(
    queues: &ConfidenceQueues,
    alpha_a: f64,
    alpha_c: f64,
) -> (Vec<f64>, Vec<f64>) {
    let ga = queues
        .action
        .iter()
        .map(|q| gamma_of(q, alpha_a, 1.0 / NUM_ACTIONS as f64))
        .collect();
    let gc = queues
        .class
        .iter()
        .map(|q| gamma_of(q, alpha_c, 1.0 / NUM_CLASSES as f64))
        .collect();
    (ga, gc)
}

/// Componentwise convex mix: new = (1 − γ) ⊙ old + γ ⊙ current.
pub fn update_logits(old: &[f64], current: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
    update_logits_oriented(old, current, gamma, false)
}

/// Same mix with an auditable alternate orientation that weights the OLD
/// logits by γ instead (not used by default).
pub fn update_logits_oriented(
    old: &[f64],
    current: &[f64],
    gamma: &[f64],
    legacy: bool,
) -> Result<Vec<f64>> {
    if old.len() != current.len() || old.len() != gamma.len() {
        return Err(Error::ShapeMismatch(format!(
            "update_logits: lengths {} / {} / {}",
            old.len(),
            current.len(),
            gamma.len()
        )));
    }
    Ok(old
        .iter()
        .zip(current)
        .zip(gamma)
        .map(|((&o, &c), &g)| {
            if legacy {
                g * o + (1.0 - g) * c
            } else {
                (1.0 - g) * o + g * c
            }
        })
        .collect())
}
