//! Episodic memory with reservoir sampling (uniform inclusion over the
//! whole stream).

use rand::Rng;

use crate::error::{Error, Result};
use crate::gridsim::{NUM_ACTIONS, NUM_CLASSES};
use crate::streamgen::StreamSample;

/// A stored stream episode plus its logits at insertion time: per-step
/// action logits and, at interaction steps only (in step order), class
/// logits.
#[derive(Debug, Clone)]
pub struct MemoryEntry {
    pub sample: StreamSample,
    pub action_logits: Vec<Vec<f64>>,
    pub class_logits: Vec<Vec<f64>>,
    pub insert_index: u64,
}

impl MemoryEntry {
    pub fn new(
        sample: StreamSample,
        action_logits: Vec<Vec<f64>>,
        class_logits: Vec<Vec<f64>>,
        insert_index: u64,
    ) -> Result<Self> {
        if action_logits.len() != sample.steps.len() {
            return Err(Error::ShapeMismatch(format!(
                "action logits {} vs steps {}",
                action_logits.len(),
                sample.steps.len()
            )));
        }
        let n_inter = sample
            .steps
            .iter()
            .filter(|s| s.action.interaction())
            .count();
        if class_logits.len() != n_inter {
            return Err(Error::ShapeMismatch(format!(
                "class logits {} vs interaction steps {n_inter}",
                class_logits.len()
            )));
        }
        for z in &action_logits {
            if z.len() != NUM_ACTIONS || z.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch("bad action logit row".to_string()));
            }
        }
        for z in &class_logits {
            if z.len() != NUM_CLASSES || z.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch("bad class logit row".to_string()));
            }
        }
        Ok(MemoryEntry {
            sample,
            action_logits,
            class_logits,
            insert_index,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EpisodicMemory {
    pub entries: Vec<MemoryEntry>,
    /// Stream items offered so far.
    pub n: u64,
    pub capacity: usize,
}

impl EpisodicMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        EpisodicMemory {
            entries: Vec::with_capacity(capacity),
            n: 0,
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reservoir sampling, algorithm R: the first M items fill the buffer; item
/// n thereafter replaces a uniform slot with probability M/n.
pub fn reservoir_insert<R: Rng>(mem: &mut EpisodicMemory, entry: MemoryEntry, rng: &mut R) {
    mem.n += 1;
    if mem.entries.len() < mem.capacity {
        mem.entries.push(entry);
    } else {
        let j = rng.gen_range(0..mem.n);
        if (j as usize) < mem.capacity {
            mem.entries[j as usize] = entry;
        }
    }
}
