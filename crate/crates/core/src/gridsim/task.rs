//! Task specifications and goal conditions.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{Behavior, EnvType, ObjectClass};
use super::layout::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalCondition {
    /// Class has been picked up at least once (or is currently carried).
    Picked(ObjectClass),
    /// Some instance of the first class sits directly on/in one of the second.
    On(ObjectClass, ObjectClass),
    /// Some instance of the class has the named state bit set.
    Hot(ObjectClass),
    Cold(ObjectClass),
    Clean(ObjectClass),
    ToggledOn(ObjectClass),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub behavior: Behavior,
    pub target_object: ObjectClass,
    /// Second target, Pick2&Place only.
    pub second_object: Option<ObjectClass>,
    pub target_receptacle: ObjectClass,
    pub goal_conditions: Vec<GoalCondition>,
}

/// Behaviors executable in an environment type. Heat and Cool need the
/// kitchen appliances; Clean needs a sink; Examine needs a lamp.
pub fn admissible_behaviors(env: EnvType) -> &'static [Behavior] {
    use Behavior::*;
    match env {
        EnvType::Kitchen => &[PickPlace, Heat, Cool, Clean, Pick2Place, Movable],
        EnvType::Livingroom => &[Examine, PickPlace, Pick2Place, Movable],
        EnvType::Bedroom => &[Examine, PickPlace, Pick2Place, Movable],
        EnvType::Bathroom => &[PickPlace, Clean, Pick2Place, Movable],
    }
}

fn goal_conditions(behavior: Behavior, target: ObjectClass, second: Option<ObjectClass>, recep: ObjectClass) -> Vec<GoalCondition> {
    use GoalCondition::*;
    match behavior {
        Behavior::Examine => vec![Picked(target), ToggledOn(ObjectClass::Lamp)],
        Behavior::PickPlace => vec![Picked(target), On(target, recep)],
        Behavior::Heat => vec![Picked(target), Hot(target), On(target, recep)],
        Behavior::Cool => vec![Picked(target), Cold(target), On(target, recep)],
        Behavior::Clean => vec![Picked(target), Clean(target), On(target, recep)],
        Behavior::Pick2Place => {
            let s = second.unwrap();
            vec![Picked(target), Picked(s), On(target, recep), On(s, recep)]
        }
        Behavior::Movable => vec![
            Picked(target),
            On(target, ObjectClass::Box),
            On(ObjectClass::Box, recep),
        ],
    }
}

/// Sample a task of `behavior` admissible in `layout`. Returns `None` when
/// the behavior is not admissible in the layout's environment type.
pub fn sample_task<R: Rng>(layout: &Layout, behavior: Behavior, rng: &mut R) -> Option<TaskSpec> {
    let env = layout.env_type;
    if !admissible_behaviors(env).contains(&behavior) {
        return None;
    }
    // Portable (non-box) targets present in this environment.
    let targets: Vec<ObjectClass> = env
        .portables()
        .iter()
        .copied()
        .filter(|&c| c != ObjectClass::Box)
        .collect();
    let target = *targets.choose(rng)?;
    let recep = match behavior {
        Behavior::Heat | Behavior::Cool | Behavior::Clean => {
            *env.plain_receptacles().choose(rng)?
        }
        Behavior::Examine => ObjectClass::Lamp,
        _ => *env.plain_receptacles().choose(rng)?,
    };
    let second = if behavior == Behavior::Pick2Place {
        let others: Vec<ObjectClass> = targets.iter().copied().filter(|&c| c != target).collect();
        Some(*others.choose(rng)?)
    } else {
        None
    };
    Some(TaskSpec {
        behavior,
        target_object: target,
        second_object: second,
        target_receptacle: recep,
        goal_conditions: goal_conditions(behavior, target, second, recep),
    })
}

impl TaskSpec {
    pub fn admissible_in(&self, layout: &Layout) -> bool {
        admissible_behaviors(layout.env_type).contains(&self.behavior)
            && layout.find_class(self.target_object).is_some()
            && layout.find_class(self.target_receptacle).is_some()
            && self
                .second_object
                .is_none_or(|c| layout.find_class(c).is_some())
    }
}
