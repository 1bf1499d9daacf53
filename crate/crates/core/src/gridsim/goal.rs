//! Goal-condition evaluation.

use super::catalog::ObjectClass;
use super::state::SimState;
use super::task::{GoalCondition, TaskSpec};

fn any_with<F: Fn(&super::state::ObjState) -> bool>(state: &SimState, class: ObjectClass, f: F) -> bool {
    state
        .objects
        .iter()
        .any(|o| o.class == class && f(o))
}

fn holds(state: &SimState, cond: &GoalCondition) -> bool {
    match *cond {
        GoalCondition::Picked(c) => {
            state.ever_picked(c)
                || state
                    .inventory
                    .is_some_and(|id| state.objects[id].class == c)
        }
        GoalCondition::On(c, r) => state.objects.iter().enumerate().any(|(rid, ro)| {
            ro.class == r
                && ro
                    .contains
                    .iter()
                    .any(|&cid| state.objects[cid].class == c && cid != rid)
        }),
        GoalCondition::Hot(c) => any_with(state, c, |o| o.bits.hot),
        GoalCondition::Cold(c) => any_with(state, c, |o| o.bits.cold),
        GoalCondition::Clean(c) => any_with(state, c, |o| o.bits.clean),
        GoalCondition::ToggledOn(c) => any_with(state, c, |o| o.bits.toggled_on),
    }
}

/// Counts satisfied goal conditions. Success is `satisfied == total`.
pub fn goal_satisfaction(state: &SimState, task: &TaskSpec) -> (usize, usize) {
    let total = task.goal_conditions.len();
    let satisfied = task
        .goal_conditions
        .iter()
        .filter(|c| holds(state, c))
        .count();
    (satisfied, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridsim::{generate_layout, sample_task, Behavior, EnvType};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn initial_state_unsatisfied() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for env in crate::gridsim::ALL_ENV_TYPES {
            let layout = Arc::new(generate_layout(env, 5, true));
            for &b in crate::gridsim::admissible_behaviors(env) {
                let task = sample_task(&layout, b, &mut rng).unwrap();
                let state = SimState::new(layout.clone());
                let (sat, total) = goal_satisfaction(&state, &task);
                assert_eq!(sat, 0, "{env:?} {b:?}");
                assert_eq!(total, task.goal_conditions.len());
            }
        }
    }

    #[test]
    fn heat_conditions_by_hand() {
        // Construct: apple hot, apple on table, picked bit set -> 3/3.
        let layout = Arc::new(generate_layout(EnvType::Kitchen, 2, true));
        let mut state = SimState::new(layout.clone());
        let apple = state
            .objects
            .iter()
            .position(|o| o.class == ObjectClass::Apple)
            .unwrap();
        let table = state
            .objects
            .iter()
            .position(|o| o.class == ObjectClass::Table)
            .unwrap();
        state.objects[apple].bits.hot = true;
        state.objects[apple].pos = None;
        state.objects[table].contains.push(apple);
        state.picked_classes |= 1 << ObjectClass::Apple.index();

        let task = crate::gridsim::TaskSpec {
            behavior: Behavior::Heat,
            target_object: ObjectClass::Apple,
            second_object: None,
            target_receptacle: ObjectClass::Table,
            goal_conditions: vec![
                GoalCondition::Picked(ObjectClass::Apple),
                GoalCondition::Hot(ObjectClass::Apple),
                GoalCondition::On(ObjectClass::Apple, ObjectClass::Table),
            ],
        };
        assert_eq!(goal_satisfaction(&state, &task), (3, 3));
    }

    #[test]
    fn partial_completion_counts() {
        let layout = Arc::new(generate_layout(EnvType::Bedroom, 1, true));
        let mut state = SimState::new(layout.clone());
        let book = state
            .objects
            .iter()
            .position(|o| o.class == ObjectClass::Book)
            .unwrap();
        let shelf = state
            .objects
            .iter()
            .position(|o| o.class == ObjectClass::Shelf)
            .unwrap();
        state.objects[book].pos = None;
        state.objects[shelf].contains.push(book);
        state.picked_classes |= 1 << ObjectClass::Book.index();

        let task = crate::gridsim::TaskSpec {
            behavior: Behavior::Pick2Place,
            target_object: ObjectClass::Book,
            second_object: Some(ObjectClass::Cd),
            target_receptacle: ObjectClass::Shelf,
            goal_conditions: vec![
                GoalCondition::Picked(ObjectClass::Book),
                GoalCondition::Picked(ObjectClass::Cd),
                GoalCondition::On(ObjectClass::Book, ObjectClass::Shelf),
                GoalCondition::On(ObjectClass::Cd, ObjectClass::Shelf),
            ],
        };
        let (sat, total) = goal_satisfaction(&state, &task);
        assert!(sat < total);
        assert_eq!(sat, 2);
    }
}
