//! Scripted expert: pose-graph shortest paths plus per-behavior macro plans
//! that always replay to success.

mod planner;
mod templates;

pub use planner::{plan_demonstration, replay, shortest_path_actions};
pub use templates::{instruction_tokens, token_id, VOCAB, VOCAB_SIZE};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gridsim::{Action, Behavior, EnvType, Layout, ObjectClass, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    ValidSeen,
    ValidUnseen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub features: Vec<f64>,
    pub action: Action,
    /// Present iff `action` is an interaction.
    pub target_class: Option<ObjectClass>,
    /// Normalized step index, strictly increasing, final value 1.
    pub progress: f64,
}

/// One expert demonstration. Steps are behind an `Arc` so stream records and
/// memory entries can share them without copying feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: u64,
    /// Templated instruction as vocabulary token ids.
    pub instruction: Vec<u16>,
    pub steps: Arc<Vec<EpisodeStep>>,
    pub task: TaskSpec,
    pub layout: Arc<Layout>,
    pub env_type: EnvType,
    pub behavior: Behavior,
    pub split: Split,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Indices of interaction steps.
    pub fn interaction_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.action.interaction())
            .map(|(i, _)| i)
    }
}

/// Populate progress labels in place: step t of T gets (t+1)/T. Idempotent.
pub fn label_progress(episode: &mut Episode) {
    let steps = Arc::make_mut(&mut episode.steps);
    let t_total = steps.len() as f64;
    for (t, s) in steps.iter_mut().enumerate() {
        s.progress = (t + 1) as f64 / t_total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridsim::{generate_layout, sample_task};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn demo(env: EnvType, behavior: Behavior, seed: u64) -> Episode {
        let layout = Arc::new(generate_layout(env, seed, true));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = sample_task(&layout, behavior, &mut rng).unwrap();
        plan_demonstration(layout, &task, seed).unwrap()
    }

    #[test]
    fn progress_labels_arithmetic() {
        let mut ep = demo(EnvType::Kitchen, Behavior::PickPlace, 0);
        Arc::make_mut(&mut ep.steps).truncate(4);
        label_progress(&mut ep);
        let got: Vec<f64> = ep.steps.iter().map(|s| s.progress).collect();
        assert_eq!(got, vec![0.25, 0.5, 0.75, 1.0]);
        // idempotent
        label_progress(&mut ep);
        let again: Vec<f64> = ep.steps.iter().map(|s| s.progress).collect();
        assert_eq!(got, again);
    }

    #[test]
    fn single_step_progress_is_one() {
        let mut ep = demo(EnvType::Kitchen, Behavior::PickPlace, 1);
        Arc::make_mut(&mut ep.steps).truncate(1);
        label_progress(&mut ep);
        assert_eq!(ep.steps[0].progress, 1.0);
    }

    #[test]
    fn episode_invariants() {
        for (env, b) in [
            (EnvType::Kitchen, Behavior::Heat),
            (EnvType::Bedroom, Behavior::Examine),
            (EnvType::Bathroom, Behavior::Clean),
            (EnvType::Livingroom, Behavior::Movable),
        ] {
            let ep = demo(env, b, 11);
            assert_eq!(ep.steps.last().unwrap().action, Action::Stop);
            for s in ep.steps.iter() {
                assert_eq!(s.action.interaction(), s.target_class.is_some());
            }
            for w in ep.steps.windows(2) {
                assert!(w[1].progress > w[0].progress);
            }
            assert!((ep.steps.last().unwrap().progress - 1.0).abs() < 1e-12);
        }
    }
}
