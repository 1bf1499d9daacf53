//! Minimal 64-bit neural-network engine: flat parameter storage, a tape for
//! reverse-mode gradients, Adam, the learning-rate schedule and checkpoints.

mod checkpoint;
mod optim;
mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use optim::{adam_step, lr_schedule, OptState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, BASE_LR};
pub use tape::{gradient_check, softmax, NodeId, Tape};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named (rows x cols) block inside the flat parameter vector. Vectors use
/// cols = 1; matrices are row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

/// All parameters of a model in one flat vector, addressed by block id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub entries: Vec<ParamEntry>,
    pub data: Vec<f64>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Register a block initialized by `init` and return its id.
    pub fn add(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        mut init: impl FnMut() -> f64,
    ) -> usize {
        let offset = self.data.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            rows,
            cols,
            offset,
        });
        self.data.extend((0..rows * cols).map(|_| init()));
        self.entries.len() - 1
    }

    pub fn shape(&self, id: usize) -> (usize, usize) {
        let e = &self.entries[id];
        (e.rows, e.cols)
    }

    pub fn slice(&self, id: usize) -> &[f64] {
        let e = &self.entries[id];
        &self.data[e.offset..e.offset + e.rows * e.cols]
    }

    pub fn slice_mut(&mut self, id: usize) -> &mut [f64] {
        let e = self.entries[id].clone();
        &mut self.data[e.offset..e.offset + e.rows * e.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Both sets describe the same architecture.
    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries == other.entries
    }

    pub fn check_same_layout(&self, other: &ParamSet) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                "parameter layouts differ".to_string(),
            ))
        }
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}
