//! Seeded layout generation: fixtures on the wall ring, portables on the
//! floor, disjoint style pools for seen/unseen layouts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{EnvType, ObjectClass};
use super::{GRID, STYLE_DIM};

pub type Cell = (i32, i32);

/// Static description of one object at episode start. Objects are identified
/// by their index in `Layout::objects`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInit {
    pub class: ObjectClass,
    /// Grid cell for top-level objects; `None` when spawned inside another.
    pub pos: Option<Cell>,
    /// Index of the containing object, if any.
    pub inside: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub env_type: EnvType,
    pub layout_id: u64,
    pub seen: bool,
    /// Room-appearance embedding, shared by every in-grid cell.
    pub style: [f64; STYLE_DIM],
    pub objects: Vec<ObjectInit>,
    pub agent_start: Cell,
}

impl Layout {
    pub fn in_grid(cell: Cell) -> bool {
        cell.0 >= 0 && cell.1 >= 0 && (cell.0 as usize) < GRID && (cell.1 as usize) < GRID
    }

    /// A cell is walkable when no fixture (non-portable object) occupies it.
    pub fn walkable(&self, cell: Cell) -> bool {
        Self::in_grid(cell)
            && !self
                .objects
                .iter()
                .any(|o| o.pos == Some(cell) && !o.class.portable())
    }

    pub fn find_class(&self, class: ObjectClass) -> Option<usize> {
        self.objects.iter().position(|o| o.class == class)
    }
}

fn mix_seed(env_type: EnvType, style_seed: u64, salt: u64) -> u64 {
    let e = env_type as u64;
    // splitmix-style mixing, stable across platforms
    let mut z = style_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(e.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(salt.wrapping_mul(0x94d0_49bb_1331_11eb));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic layout construction.
///
/// The style vector is drawn from a pool keyed by (env_type, style_seed)
/// alone; unseen layouts shift every component by 0.5 so the seen and unseen
/// pools are disjoint componentwise.
pub fn generate_layout(env_type: EnvType, style_seed: u64, seen: bool) -> Layout {
    let mut style_rng = ChaCha8Rng::seed_from_u64(mix_seed(env_type, style_seed, 17));
    let mut style = [0.0; STYLE_DIM];
    for s in style.iter_mut() {
        let base: f64 = rand::Rng::gen_range(&mut style_rng, 0.02..0.48);
        *s = if seen { base } else { base + 0.5 };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(env_type, style_seed, if seen { 1 } else { 2 }));

    // Fixtures go on non-corner wall-ring cells so every fixture keeps an
    // adjacent walkable interior cell.
    let g = GRID as i32;
    let mut ring: Vec<Cell> = Vec::new();
    for x in 0..g {
        for y in 0..g {
            let on_ring = x == 0 || y == 0 || x == g - 1 || y == g - 1;
            let corner = (x == 0 || x == g - 1) && (y == 0 || y == g - 1);
            if on_ring && !corner {
                ring.push((x, y));
            }
        }
    }
    ring.shuffle(&mut rng);

    let mut objects = Vec::new();
    for (&class, &pos) in env_type.fixtures().iter().zip(ring.iter()) {
        objects.push(ObjectInit {
            class,
            pos: Some(pos),
            inside: None,
        });
    }

    let agent_start = (g / 2, g / 2);
    let mut interior: Vec<Cell> = (1..g - 1)
        .flat_map(|x| (1..g - 1).map(move |y| (x, y)))
        .filter(|&c| c != agent_start)
        .collect();
    interior.shuffle(&mut rng);

    for (&class, &pos) in env_type.portables().iter().zip(interior.iter()) {
        objects.push(ObjectInit {
            class,
            pos: Some(pos),
            inside: None,
        });
    }

    Layout {
        env_type,
        layout_id: mix_seed(env_type, style_seed, if seen { 3 } else { 4 }),
        seen,
        style,
        objects,
        agent_start,
    }
}
