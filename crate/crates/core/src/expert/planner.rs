//! Pose-graph navigation and macro expansion for the seven behaviors.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gridsim::{
    goal_satisfaction, observe, step, Action, Behavior, Heading, Layout, ObjectClass, SimState,
    TaskSpec, ALL_HEADINGS,
};

use super::templates::instruction_tokens;
use super::{Episode, EpisodeStep, Split};

pub type Pose = ((i32, i32), Heading);

/// Navigation actions in fixed tie-break order.
const NAV_ACTIONS: [Action; 3] = [Action::MoveAhead, Action::RotateLeft, Action::RotateRight];

fn nav_neighbor(state: &SimState, pose: Pose, action: Action) -> Option<Pose> {
    let (cell, heading) = pose;
    match action {
        Action::MoveAhead => {
            let (dx, dy) = heading.delta();
            let dest = (cell.0 + dx, cell.1 + dy);
            state.cell_walkable(dest).then_some((dest, heading))
        }
        Action::RotateLeft => Some((cell, heading.left())),
        Action::RotateRight => Some((cell, heading.right())),
        _ => None,
    }
}

fn bfs(state: &SimState, start: Pose, goals: &[Pose]) -> Result<Vec<Action>> {
    if goals.contains(&start) {
        return Ok(Vec::new());
    }
    let mut parent: HashMap<Pose, (Pose, Action)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    while let Some(pose) = queue.pop_front() {
        for action in NAV_ACTIONS {
            if let Some(next) = nav_neighbor(state, pose, action) {
                if next != start && !parent.contains_key(&next) {
                    parent.insert(next, (pose, action));
                    if goals.contains(&next) {
                        let mut actions = Vec::new();
                        let mut cur = next;
                        while cur != start {
                            let (prev, a) = parent[&cur];
                            actions.push(a);
                            cur = prev;
                        }
                        actions.reverse();
                        return Ok(actions);
                    }
                    queue.push_back(next);
                }
            }
        }
    }
    Err(Error::Unreachable(format!("no path from {start:?}")))
}

/// Minimal action sequence from the agent's pose to `goal_pose`, breadth-first
/// over the (cell, heading) graph with MoveAhead < RotateLeft < RotateRight
/// tie-breaking.
pub fn shortest_path_actions(state: &SimState, goal_pose: Pose) -> Result<Vec<Action>> {
    bfs(state, (state.agent_pos, state.heading), &[goal_pose])
}

/// World cell an interaction with `class` must face: the instance's own cell,
/// or its top-level container's.
fn interaction_cell(state: &SimState, class: ObjectClass) -> Option<(i32, i32)> {
    fn top_cell(state: &SimState, id: usize) -> Option<(i32, i32)> {
        if let Some(p) = state.objects[id].pos {
            return Some(p);
        }
        let parent = state
            .objects
            .iter()
            .position(|o| o.contains.contains(&id))?;
        top_cell(state, parent)
    }
    // Prefer instances not carried by the agent.
    let id = state
        .objects
        .iter()
        .enumerate()
        .position(|(i, o)| o.class == class && state.inventory != Some(i))?;
    top_cell(state, id)
}

struct Recorder {
    state: SimState,
    steps: Vec<EpisodeStep>,
}

impl Recorder {
    fn act(&mut self, action: Action, target: Option<ObjectClass>) -> Result<()> {
        let features = observe(&self.state);
        let (next, out) = step(&self.state, action, target)?;
        if !out.ok {
            return Err(Error::InadmissibleTask(format!(
                "expert action {action:?} {target:?} failed at {:?}",
                self.state.agent_pos
            )));
        }
        self.steps.push(EpisodeStep {
            features,
            action,
            target_class: target,
            progress: 0.0,
        });
        self.state = next;
        Ok(())
    }

    /// Navigate to a pose adjacent to the class instance, facing it.
    fn goto_face(&mut self, class: ObjectClass) -> Result<()> {
        let cell = interaction_cell(&self.state, class)
            .ok_or_else(|| Error::InadmissibleTask(format!("no {class:?} in layout")))?;
        let mut goals = Vec::new();
        for h in ALL_HEADINGS {
            let (dx, dy) = h.delta();
            let stand = (cell.0 - dx, cell.1 - dy);
            if self.state.cell_walkable(stand) {
                goals.push((stand, h));
            }
        }
        if goals.is_empty() {
            return Err(Error::Unreachable(format!("{class:?} has no free adjacent cell")));
        }
        let path = bfs(&self.state, (self.state.agent_pos, self.state.heading), &goals)?;
        for a in path {
            self.act(a, None)?;
        }
        Ok(())
    }
}

/// Produce a guaranteed-successful demonstration for `task` in `layout`.
/// Deterministic; `id` is carried into the episode record.
pub fn plan_demonstration(layout: Arc<Layout>, task: &TaskSpec, id: u64) -> Result<Episode> {
    if !task.admissible_in(&layout) {
        return Err(Error::InadmissibleTask(format!(
            "{:?} in {:?}",
            task.behavior, layout.env_type
        )));
    }
    let mut r = Recorder {
        state: SimState::new(layout.clone()),
        steps: Vec::new(),
    };
    let t = task.target_object;
    let recep = task.target_receptacle;

    match task.behavior {
        Behavior::Examine => {
            r.goto_face(t)?;
            r.act(Action::Pickup, Some(t))?;
            r.goto_face(ObjectClass::Lamp)?;
            r.act(Action::Toggle, Some(ObjectClass::Lamp))?;
        }
        Behavior::PickPlace => {
            r.goto_face(t)?;
            r.act(Action::Pickup, Some(t))?;
            r.goto_face(recep)?;
            r.act(Action::Put, Some(recep))?;
        }
        Behavior::Heat => {
            let mw = ObjectClass::Microwave;
            r.goto_face(t)?;
            r.act(Action::Pickup, Some(t))?;
            r.goto_face(mw)?;
            r.act(Action::Open, Some(mw))?;
            r.act(Action::Put, Some(mw))?;
            r.act(Action::Close, Some(mw))?;
            r.act(Action::Toggle, Some(mw))?;
            r.act(Action::Open, Some(mw))?;
            r.act(Action::Pickup, Some(t))?;
            r.act(Action::Close, Some(mw))?;
            r.goto_face(recep)?;
            r.act(Action::Put, Some(recep))?;
        }
        Behavior::Cool => {
            let fr = ObjectClass::Fridge;
            r.goto_face(t)?;
            r.act(Action::Pickup, Some(t))?;
            r.goto_face(fr)?;
            r.act(Action::Open, Some(fr))?;
            r.act(Action::Put, Some(fr))?;
            r.act(Action::Close, Some(fr))?;
            r.act(Action::Open, Some(fr))?;
            r.act(Action::Pickup, Some(t))?;
            r.act(Action::Close, Some(fr))?;
            r.goto_face(recep)?;
            r.act(Action::Put, Some(recep))?;
        }
        Behavior::Clean => {
            let sink = ObjectClass::Sink;
            r.goto_face(t)?;
            r.act(Action::Pickup, Some(t))?;
            r.goto_face(sink)?;
            r.act(Action::Put, Some(sink))?;
            r.act(Action::Toggle, Some(sink))?;
            r.act(Action::Pickup, Some(t))?;
            r.goto_face(recep)?;
            r.act(Action::Put, Some(recep))?;
        }
        Behavior::Pick2Place => {
            let s = task.second_object.unwrap();
            r.goto_face(t)?;
            r.act(Action::Pickup, Some(t))?;
            r.goto_face(recep)?;
            r.act(Action::Put, Some(recep))?;
            r.goto_face(s)?;
            r.act(Action::Pickup, Some(s))?;
            r.goto_face(recep)?;
            r.act(Action::Put, Some(recep))?;
        }
        Behavior::Movable => {
            let bx = ObjectClass::Box;
            r.goto_face(t)?;
            r.act(Action::Pickup, Some(t))?;
            r.goto_face(bx)?;
            r.act(Action::Put, Some(bx))?;
            r.act(Action::Pickup, Some(bx))?;
            r.goto_face(recep)?;
            r.act(Action::Put, Some(recep))?;
        }
    }
    r.act(Action::Stop, None)?;

    let (sat, total) = goal_satisfaction(&r.state, task);
    if sat != total || r.state.failed_interactions != 0 {
        return Err(Error::InadmissibleTask(format!(
            "expert plan incomplete: {sat}/{total}, {} failed interactions",
            r.state.failed_interactions
        )));
    }

    let mut episode = Episode {
        id,
        instruction: instruction_tokens(task),
        steps: Arc::new(r.steps),
        task: task.clone(),
        env_type: layout.env_type,
        behavior: task.behavior,
        split: Split::Train,
        layout,
    };
    super::label_progress(&mut episode);
    Ok(episode)
}

/// Replay an episode's actions through the simulator; returns
/// (success, satisfied, total, failed_interactions).
pub fn replay(episode: &Episode) -> Result<(bool, usize, usize, usize)> {
    let mut state = SimState::new(episode.layout.clone());
    for s in episode.steps.iter() {
        let (next, _) = step(&state, s.action, s.target_class)?;
        state = next;
    }
    let (sat, total) = goal_satisfaction(&state, &episode.task);
    Ok((sat == total, sat, total, state.failed_interactions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridsim::{generate_layout, sample_task, EnvType};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_path_at_goal() {
        let s = SimState::new(Arc::new(generate_layout(EnvType::Kitchen, 0, true)));
        let path = shortest_path_actions(&s, (s.agent_pos, s.heading)).unwrap();
        assert!(path.is_empty());
    }

    #[test]
    fn one_cell_ahead() {
        let s = SimState::new(Arc::new(generate_layout(EnvType::Kitchen, 0, true)));
        let (dx, dy) = s.heading.delta();
        let goal = ((s.agent_pos.0 + dx, s.agent_pos.1 + dy), s.heading);
        assert!(s.cell_walkable(goal.0));
        assert_eq!(shortest_path_actions(&s, goal).unwrap(), vec![Action::MoveAhead]);
    }

    /// Independent exhaustive-relaxation distance oracle over the pose graph.
    fn brute_force_distance(state: &SimState, start: Pose, goal: Pose) -> Option<usize> {
        let mut dist: HashMap<Pose, usize> = HashMap::new();
        dist.insert(start, 0);
        // Bellman-Ford style: relax until fixpoint.
        loop {
            let mut changed = false;
            let poses: Vec<(Pose, usize)> = dist.iter().map(|(&p, &d)| (p, d)).collect();
            for (pose, d) in poses {
                for action in NAV_ACTIONS {
                    if let Some(next) = nav_neighbor(state, pose, action) {
                        if dist.get(&next).is_none_or(|&nd| nd > d + 1) {
                            dist.insert(next, d + 1);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist.get(&goal).copied()
    }

    #[test]
    fn bfs_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..8u64 {
            for env in crate::gridsim::ALL_ENV_TYPES {
                let mut s = SimState::new(Arc::new(generate_layout(env, seed, true)));
                // random start pose
                use rand::Rng;
                loop {
                    let c = (rng.gen_range(0..7), rng.gen_range(0..7));
                    if s.cell_walkable(c) {
                        s.agent_pos = c;
                        break;
                    }
                }
                s.heading = ALL_HEADINGS[rng.gen_range(0..4)];
                let goal_cell = loop {
                    let c = (rng.gen_range(0..7), rng.gen_range(0..7));
                    if s.cell_walkable(c) {
                        break c;
                    }
                };
                let goal = (goal_cell, ALL_HEADINGS[rng.gen_range(0..4)]);
                let expected = brute_force_distance(&s, (s.agent_pos, s.heading), goal);
                match shortest_path_actions(&s, goal) {
                    Ok(path) => assert_eq!(Some(path.len()), expected),
                    Err(_) => assert_eq!(expected, None),
                }
            }
        }
    }

    #[test]
    fn demonstrations_replay_to_success() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..5u64 {
            for env in crate::gridsim::ALL_ENV_TYPES {
                for &b in crate::gridsim::admissible_behaviors(env) {
                    let layout = Arc::new(generate_layout(env, seed, seed % 2 == 0));
                    let task = sample_task(&layout, b, &mut rng).unwrap();
                    let ep = plan_demonstration(layout, &task, 0).unwrap();
                    let (success, sat, total, failed) = replay(&ep).unwrap();
                    assert!(success, "{env:?} {b:?} seed {seed}: {sat}/{total}");
                    assert_eq!(failed, 0);
                }
            }
        }
    }

    #[test]
    fn heat_interaction_subsequence() {
        let layout = Arc::new(generate_layout(EnvType::Kitchen, 4, true));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let task = sample_task(&layout, Behavior::Heat, &mut rng).unwrap();
        let ep = plan_demonstration(layout, &task, 0).unwrap();
        let mw_actions: Vec<Action> = ep
            .steps
            .iter()
            .filter(|s| s.target_class == Some(ObjectClass::Microwave))
            .map(|s| s.action)
            .collect();
        assert_eq!(
            mw_actions,
            vec![
                Action::Open,
                Action::Put,
                Action::Close,
                Action::Toggle,
                Action::Open,
                Action::Close,
            ]
        );
        // The retrieval Pickup between the reopen and final Close targets the
        // heated object itself.
        let seq: Vec<(Action, Option<ObjectClass>)> = ep
            .steps
            .iter()
            .filter(|s| s.action.interaction())
            .map(|s| (s.action, s.target_class))
            .collect();
        let reopen = seq
            .iter()
            .rposition(|&(a, c)| a == Action::Open && c == Some(ObjectClass::Microwave))
            .unwrap();
        assert_eq!(
            seq[reopen + 1],
            (Action::Pickup, Some(task.target_object))
        );
    }

    #[test]
    fn inadmissible_task_rejected() {
        let layout = Arc::new(generate_layout(EnvType::Bathroom, 0, true));
        let kitchen = generate_layout(EnvType::Kitchen, 0, true);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let task = sample_task(&Arc::new(kitchen), Behavior::Heat, &mut rng).unwrap();
        assert!(plan_demonstration(layout, &task, 0).is_err());
    }
}
