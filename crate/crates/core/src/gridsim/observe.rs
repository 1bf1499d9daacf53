//! Symbolic egocentric observation features.
//!
//! Layout of the feature vector:
//! - 3x3 front-facing window in the agent frame (forward depth 0..3,
//!   lateral -1..2); per cell: class one-hots (15) + state bits (6) +
//!   room style (8). Out-of-grid cells are all-zero, which distinguishes
//!   walls from empty floor (floor carries the style vector).
//! - heading one-hot (4)
//! - inventory class one-hot (16; slot 0 = empty hand)
//! - per-class locator: (presence, forward, lateral) egocentric displacement
//!   of the nearest instance, normalized by the grid size (45)

use super::catalog::{ALL_CLASSES, NUM_CLASSES};
use super::state::SimState;
use super::{GRID, STYLE_DIM};

const CELL_DIM: usize = NUM_CLASSES + 6 + STYLE_DIM;
/// Observation feature dimension, constant across all episodes.
pub const OBS_DIM: usize = 9 * CELL_DIM + 4 + (NUM_CLASSES + 1) + 3 * NUM_CLASSES;

/// Window slots in agent-frame (forward, lateral) order.
pub const WINDOW_SLOTS: [(i32, i32); 9] = [
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
    (2, -1),
    (2, 0),
    (2, 1),
];

/// World cell of a window slot given the agent pose.
pub fn window_world_cell(state: &SimState, forward: i32, lateral: i32) -> (i32, i32) {
    let (fx, fy) = state.heading.delta();
    let (rx, ry) = state.heading.right().delta();
    (
        state.agent_pos.0 + forward * fx + lateral * rx,
        state.agent_pos.1 + forward * fy + lateral * ry,
    )
}

/// World position of an object: its own cell, or its top-level container's.
/// `None` while carried by the agent.
fn object_cell(state: &SimState, id: usize) -> Option<(i32, i32)> {
    if let Some(p) = state.objects[id].pos {
        return Some(p);
    }
    if state.inventory == Some(id) {
        return None;
    }
    state
        .objects
        .iter()
        .enumerate()
        .find(|(_, o)| o.contains.contains(&id))
        .and_then(|(pid, _)| object_cell(state, pid))
}

pub fn observe(state: &SimState) -> Vec<f64> {
    let mut v = vec![0.0; OBS_DIM];

    for (slot, &(f, l)) in WINDOW_SLOTS.iter().enumerate() {
        let cell = window_world_cell(state, f, l);
        if !super::layout::Layout::in_grid(cell) {
            continue;
        }
        let base = slot * CELL_DIM;
        for (id, o) in state.objects.iter().enumerate() {
            let top_here = o.pos == Some(cell);
            // Contents are visible when the container is open or unopenable.
            let visible_inside = object_cell(state, id) == Some(cell)
                && o.pos.is_none()
                && state.objects.iter().any(|r| {
                    r.pos == Some(cell)
                        && r.contains.contains(&id)
                        && (!r.class.openable() || r.bits.open)
                });
            if top_here || visible_inside {
                v[base + o.class.index()] = 1.0;
                let bits = [
                    o.bits.open,
                    o.bits.toggled_on,
                    o.bits.hot,
                    o.bits.cold,
                    o.bits.clean,
                    o.bits.dirty,
                ];
                for (k, &b) in bits.iter().enumerate() {
                    if b {
                        v[base + NUM_CLASSES + k] = 1.0;
                    }
                }
            }
        }
        for (k, &s) in state.layout.style.iter().enumerate() {
            v[base + NUM_CLASSES + 6 + k] = s;
        }
    }

    let mut off = 9 * CELL_DIM;
    v[off + state.heading.index()] = 1.0;
    off += 4;

    match state.inventory {
        None => v[off] = 1.0,
        Some(id) => v[off + 1 + state.objects[id].class.index()] = 1.0,
    }
    off += NUM_CLASSES + 1;

    let (fx, fy) = state.heading.delta();
    let (rx, ry) = state.heading.right().delta();
    let norm = (GRID - 1) as f64;
    for (ci, &class) in ALL_CLASSES.iter().enumerate() {
        let mut best: Option<(i32, i32)> = None;
        for (id, o) in state.objects.iter().enumerate() {
            if o.class != class {
                continue;
            }
            if let Some(cell) = object_cell(state, id) {
                let d = (cell.0 - state.agent_pos.0, cell.1 - state.agent_pos.1);
                let better = match best {
                    None => true,
                    Some(b) => d.0.abs() + d.1.abs() < b.0.abs() + b.1.abs(),
                };
                if better {
                    best = Some(d);
                }
            }
        }
        if let Some((dx, dy)) = best {
            let fwd = (dx * fx + dy * fy) as f64 / norm;
            let lat = (dx * rx + dy * ry) as f64 / norm;
            v[off + 3 * ci] = 1.0;
            v[off + 3 * ci + 1] = fwd;
            v[off + 3 * ci + 2] = lat;
        }
    }

    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridsim::state::{ALL_HEADINGS, Heading};
    use crate::gridsim::{generate_layout, EnvType};
    use std::sync::Arc;

    #[test]
    fn purity() {
        let s = SimState::new(Arc::new(generate_layout(EnvType::Kitchen, 0, true)));
        assert_eq!(observe(&s), observe(&s));
        assert_eq!(observe(&s).len(), OBS_DIM);
    }

    #[test]
    fn locality_outside_window() {
        let layout = Arc::new(generate_layout(EnvType::Kitchen, 0, true));
        let mut a = SimState::new(layout.clone());
        a.agent_pos = (3, 3);
        a.heading = Heading::North;
        let mut b = a.clone();
        // Flip a state bit on an object far behind the agent (south wall).
        if let Some(id) = b
            .objects
            .iter()
            .position(|o| o.pos.is_some_and(|p| p.1 == 0))
        {
            b.objects[id].bits.dirty = true;
            let wa = &observe(&a)[..9 * CELL_DIM];
            let wb = &observe(&b)[..9 * CELL_DIM];
            assert_eq!(wa, wb);
        }
    }

    /// Window block matches an independent enumeration of world cells per
    /// heading frame: the class one-hot of each slot equals the classes
    /// present at the enumerated world cell.
    #[test]
    fn window_follows_heading_frame() {
        let layout = Arc::new(generate_layout(EnvType::Livingroom, 4, true));
        let mut s = SimState::new(layout.clone());
        s.agent_pos = (2, 3);
        for h in ALL_HEADINGS {
            s.heading = h;
            let v = observe(&s);
            for (slot, &(f, l)) in WINDOW_SLOTS.iter().enumerate() {
                let cell = window_world_cell(&s, f, l);
                for (ci, &class) in crate::gridsim::catalog::ALL_CLASSES.iter().enumerate() {
                    let expected = crate::gridsim::Layout::in_grid(cell)
                        && s.objects
                            .iter()
                            .any(|o| o.class == class && o.pos == Some(cell));
                    let got = v[slot * CELL_DIM + ci] > 0.5;
                    assert_eq!(expected, got, "heading {h:?} slot {slot} class {class:?}");
                }
            }
        }
    }
}
