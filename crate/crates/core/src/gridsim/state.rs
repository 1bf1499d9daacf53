//! Simulator state and the pure step transition.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::catalog::ObjectClass;
use super::layout::{Cell, Layout};
use super::{FAIL_BUDGET, STEP_BUDGET};
use crate::error::{Error, Result};

/// Number of actions.
pub const NUM_ACTIONS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveAhead,
    RotateLeft,
    RotateRight,
    Pickup,
    Put,
    Open,
    Close,
    Toggle,
    Stop,
}

pub const ALL_ACTIONS: [Action; NUM_ACTIONS] = [
    Action::MoveAhead,
    Action::RotateLeft,
    Action::RotateRight,
    Action::Pickup,
    Action::Put,
    Action::Open,
    Action::Close,
    Action::Toggle,
    Action::Stop,
];

impl Action {
    pub fn index(self) -> usize {
        ALL_ACTIONS.iter().position(|&a| a == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        ALL_ACTIONS.get(i).copied()
    }

    /// Interaction actions carry a target object class.
    pub fn interaction(self) -> bool {
        use Action::*;
        matches!(self, Pickup | Put | Open | Close | Toggle)
    }

    pub fn token(self) -> &'static str {
        use Action::*;
        match self {
            MoveAhead => "move_ahead",
            RotateLeft => "rotate_left",
            RotateRight => "rotate_right",
            Pickup => "pickup",
            Put => "put",
            Open => "open",
            Close => "close",
            Toggle => "toggle",
            Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

pub const ALL_HEADINGS: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

impl Heading {
    pub fn index(self) -> usize {
        ALL_HEADINGS.iter().position(|&h| h == self).unwrap()
    }

    /// Unit step in grid coordinates; y grows northwards.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::North => (0, 1),
            Heading::East => (1, 0),
            Heading::South => (0, -1),
            Heading::West => (-1, 0),
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    pub fn right(self) -> Heading {
        self.left().left().left()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StateBits {
    pub open: bool,
    pub toggled_on: bool,
    pub hot: bool,
    pub cold: bool,
    pub clean: bool,
    pub dirty: bool,
}

/// Mutable per-object state within an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjState {
    pub class: ObjectClass,
    /// Cell for top-level objects; `None` while contained or carried.
    pub pos: Option<Cell>,
    pub bits: StateBits,
    /// Ids of directly contained objects.
    pub contains: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub layout: Arc<Layout>,
    pub objects: Vec<ObjState>,
    pub agent_pos: Cell,
    pub heading: Heading,
    /// Id of the carried object, if any.
    pub inventory: Option<usize>,
    pub step_count: usize,
    pub failed_interactions: usize,
    /// Bitmask over class indices of classes picked up at least once.
    pub picked_classes: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepEvent {
    Moved,
    Blocked,
    Rotated,
    PickedUp,
    PutDown,
    Opened,
    Closed,
    Toggled,
    Stopped,
    InteractFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub ok: bool,
    pub event: StepEvent,
}

impl SimState {
    pub fn new(layout: Arc<Layout>) -> Self {
        let objects = layout
            .objects
            .iter()
            .map(|o| ObjState {
                class: o.class,
                pos: o.pos,
                bits: StateBits::default(),
                contains: Vec::new(),
            })
            .collect();
        SimState {
            agent_pos: layout.agent_start,
            heading: Heading::North,
            layout,
            objects,
            inventory: None,
            step_count: 0,
            failed_interactions: 0,
            picked_classes: 0,
        }
    }

    pub fn faced_cell(&self) -> Cell {
        let (dx, dy) = self.heading.delta();
        (self.agent_pos.0 + dx, self.agent_pos.1 + dy)
    }

    /// Top-level object of `class` at `cell`.
    pub fn top_level_at(&self, cell: Cell, class: ObjectClass) -> Option<usize> {
        self.objects
            .iter()
            .position(|o| o.pos == Some(cell) && o.class == class)
    }

    /// A cell is walkable when nothing non-portable stands on it.
    pub fn cell_walkable(&self, cell: Cell) -> bool {
        Layout::in_grid(cell)
            && !self
                .objects
                .iter()
                .any(|o| o.pos == Some(cell) && !o.class.portable())
    }

    /// Object of `class` accessible at `cell`: either top-level, or directly
    /// inside a top-level receptacle that is open or not openable.
    fn accessible_at(&self, cell: Cell, class: ObjectClass) -> Option<usize> {
        if let Some(id) = self.top_level_at(cell, class) {
            return Some(id);
        }
        for (rid, r) in self.objects.iter().enumerate() {
            if r.pos == Some(cell) && (!r.class.openable() || r.bits.open) {
                if let Some(&id) = self
                    .contains_of(rid)
                    .iter()
                    .find(|&&id| self.objects[id].class == class)
                {
                    return Some(id);
                }
            }
        }
        None
    }

    fn contains_of(&self, id: usize) -> &[usize] {
        &self.objects[id].contains
    }

    pub fn ever_picked(&self, class: ObjectClass) -> bool {
        self.picked_classes & (1 << class.index()) != 0
    }
}

fn fail(state: SimState) -> (SimState, StepOutcome) {
    let mut s = state;
    s.failed_interactions += 1;
    (
        s,
        StepOutcome {
            ok: false,
            event: StepEvent::InteractFailed,
        },
    )
}

/// Pure transition. Budget exhaustion is a caller error, distinct from
/// in-world failure (which is reported through `StepOutcome`).
pub fn step(
    state: &SimState,
    action: Action,
    target: Option<ObjectClass>,
) -> Result<(SimState, StepOutcome)> {
    if state.step_count >= STEP_BUDGET {
        return Err(Error::BudgetExhausted(state.step_count));
    }
    let mut s = state.clone();
    s.step_count += 1;

    // Target arity mismatches are in-world interaction failures.
    if action.interaction() != target.is_some() {
        return Ok(fail(s));
    }

    let outcome = match action {
        Action::MoveAhead => {
            let dest = s.faced_cell();
            if s.cell_walkable(dest) {
                s.agent_pos = dest;
                StepOutcome {
                    ok: true,
                    event: StepEvent::Moved,
                }
            } else {
                StepOutcome {
                    ok: false,
                    event: StepEvent::Blocked,
                }
            }
        }
        Action::RotateLeft => {
            s.heading = s.heading.left();
            StepOutcome {
                ok: true,
                event: StepEvent::Rotated,
            }
        }
        Action::RotateRight => {
            s.heading = s.heading.right();
            StepOutcome {
                ok: true,
                event: StepEvent::Rotated,
            }
        }
        Action::Stop => StepOutcome {
            ok: true,
            event: StepEvent::Stopped,
        },
        Action::Pickup => {
            let class = target.unwrap();
            let cell = s.faced_cell();
            match s.accessible_at(cell, class) {
                Some(id) if s.inventory.is_none() && class.portable() => {
                    // Detach from cell or parent container.
                    s.objects[id].pos = None;
                    for o in s.objects.iter_mut() {
                        o.contains.retain(|&c| c != id);
                    }
                    s.inventory = Some(id);
                    s.picked_classes |= 1 << class.index();
                    StepOutcome {
                        ok: true,
                        event: StepEvent::PickedUp,
                    }
                }
                _ => return Ok(fail(s)),
            }
        }
        Action::Put => {
            let class = target.unwrap();
            let cell = s.faced_cell();
            let item = match s.inventory {
                Some(i) => i,
                None => return Ok(fail(s)),
            };
            match s.top_level_at(cell, class) {
                Some(rid)
                    if class.receptacle()
                        && (!class.openable() || s.objects[rid].bits.open)
                        && rid != item =>
                {
                    s.objects[rid].contains.push(item);
                    s.inventory = None;
                    StepOutcome {
                        ok: true,
                        event: StepEvent::PutDown,
                    }
                }
                _ => return Ok(fail(s)),
            }
        }
        Action::Open => {
            let class = target.unwrap();
            match s.top_level_at(s.faced_cell(), class) {
                Some(id) if class.openable() && !s.objects[id].bits.open => {
                    s.objects[id].bits.open = true;
                    StepOutcome {
                        ok: true,
                        event: StepEvent::Opened,
                    }
                }
                _ => return Ok(fail(s)),
            }
        }
        Action::Close => {
            let class = target.unwrap();
            match s.top_level_at(s.faced_cell(), class) {
                Some(id) if class.openable() && s.objects[id].bits.open => {
                    s.objects[id].bits.open = false;
                    if class == ObjectClass::Fridge {
                        // Closing the fridge chills its contents.
                        for cid in s.objects[id].contains.clone() {
                            s.objects[cid].bits.cold = true;
                            s.objects[cid].bits.hot = false;
                        }
                    }
                    StepOutcome {
                        ok: true,
                        event: StepEvent::Closed,
                    }
                }
                _ => return Ok(fail(s)),
            }
        }
        Action::Toggle => {
            let class = target.unwrap();
            match s.top_level_at(s.faced_cell(), class) {
                Some(id) if class.toggleable() => {
                    let now_on = !s.objects[id].bits.toggled_on;
                    s.objects[id].bits.toggled_on = now_on;
                    if now_on {
                        match class {
                            ObjectClass::Microwave => {
                                for cid in s.objects[id].contains.clone() {
                                    s.objects[cid].bits.hot = true;
                                    s.objects[cid].bits.cold = false;
                                }
                            }
                            ObjectClass::Sink => {
                                for cid in s.objects[id].contains.clone() {
                                    s.objects[cid].bits.clean = true;
                                    s.objects[cid].bits.dirty = false;
                                }
                            }
                            _ => {}
                        }
                    }
                    StepOutcome {
                        ok: true,
                        event: StepEvent::Toggled,
                    }
                }
                _ => return Ok(fail(s)),
            }
        }
    };
    Ok((s, outcome))
}

/// Episode termination rule shared by evaluation rollouts.
pub fn terminated(state: &SimState, last: Option<StepEvent>) -> bool {
    last == Some(StepEvent::Stopped)
        || state.step_count >= STEP_BUDGET
        || state.failed_interactions >= FAIL_BUDGET
}
