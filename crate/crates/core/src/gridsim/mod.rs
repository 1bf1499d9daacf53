//! Deterministic 7x7 grid-world simulator.
//!
//! Seven behavior types (Examine, Pick&Place, Heat, Cool, Clean,
//! Pick2&Place, Movable) across four environment types (Kitchen,
//! Livingroom, Bedroom, Bathroom). All transitions are pure value-semantics
//! functions so simulations can run in parallel, one state per worker.

mod catalog;
mod goal;
mod layout;
mod observe;
mod state;
mod task;

pub use catalog::{
    Behavior, EnvType, ObjectClass, ALL_BEHAVIORS, ALL_CLASSES, ALL_ENV_TYPES, NUM_CLASSES,
};
pub use goal::goal_satisfaction;
pub use layout::{generate_layout, Layout, ObjectInit};
pub use observe::{observe, OBS_DIM};
pub use state::{
    step, terminated, Action, Heading, ObjState, SimState, StateBits, StepEvent, StepOutcome,
    ALL_ACTIONS, ALL_HEADINGS, NUM_ACTIONS,
};
pub use task::{admissible_behaviors, sample_task, GoalCondition, TaskSpec};

/// Grid side length.
pub const GRID: usize = 7;
/// Style vector dimension (room appearance embedding).
pub const STYLE_DIM: usize = 8;
/// Hard per-episode step budget.
pub const STEP_BUDGET: usize = 100;
/// Failed-interaction budget; exceeding it terminates the episode.
pub const FAIL_BUDGET: usize = 10;
