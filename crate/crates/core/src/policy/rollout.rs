//! Greedy self-fed evaluation rollout and trajectory dumps.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::expert::instruction_tokens;
use crate::gridsim::{
    goal_satisfaction, observe, step, terminated, Action, Layout, ObjectClass, SimState,
    StepEvent, TaskSpec, ALL_ACTIONS, ALL_CLASSES,
};

use super::{argmax, Policy, RolloutState, START_ACTION};

#[derive(Debug, Clone, Serialize)]
pub struct TrajStep {
    pub step: usize,
    pub action: Action,
    pub target: Option<ObjectClass>,
    pub ok: bool,
}

/// Roll the policy out from the task's initial state, feeding back its own
/// previous predicted action. Terminates on Stop, `budget` steps or the
/// simulator's failed-interaction budget. Returns the trajectory, success and
/// the goal-condition fraction (satisfied, total).
pub fn greedy_rollout(
    p: &Policy,
    layout: Arc<Layout>,
    task: &TaskSpec,
    budget: usize,
) -> (Vec<TrajStep>, bool, (usize, usize)) {
    let instruction = instruction_tokens(task);
    let mut rt = RolloutState::new(p, &instruction);
    let mut state = SimState::new(layout);
    let mut prev = START_ACTION;
    let mut traj = Vec::new();

    loop {
        let features = observe(&state);
        let (za, zc, _) = rt.step(&features, prev);
        let action = ALL_ACTIONS[argmax(&za)];
        let target = if action.interaction() {
            Some(ALL_CLASSES[argmax(&zc)])
        } else {
            None
        };
        let (next, outcome) = match step(&state, action, target) {
            Ok(r) => r,
            Err(_) => break,
        };
        traj.push(TrajStep {
            step: state.step_count,
            action,
            target,
            ok: outcome.ok,
        });
        state = next;
        prev = action.index();
        if terminated(&state, Some(outcome.event)) || state.step_count >= budget {
            break;
        }
        // Defensive: `terminated` covers Stop through the event.
        debug_assert!(outcome.event != StepEvent::Stopped);
    }

    let (sat, total) = goal_satisfaction(&state, task);
    (traj, sat == total, (sat, total))
}

/// JSON-lines trajectory dump for qualitative inspection.
pub fn write_trajectory(path: &Path, traj: &[TrajStep]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for t in traj {
        serde_json::to_writer(&mut w, t)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
