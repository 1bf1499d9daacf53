//! Fixed instruction vocabulary and behavior templates.

use crate::gridsim::{Behavior, TaskSpec};

/// Versioned, fixed vocabulary. Order defines token ids.
pub const VOCAB: [&str; 27] = [
    "examine", "the", "under", "put", "on", "heat", "cool", "clean", "then", "it", "and", "in",
    // object words
    "table", "microwave", "fridge", "sink", "lamp", "shelf", "dresser", "sofa", "box", "apple",
    "mug", "book", "cd", "soapbar", "cloth",
];

pub const VOCAB_SIZE: usize = VOCAB.len();

pub fn token_id(word: &str) -> u16 {
    VOCAB
        .iter()
        .position(|&w| w == word)
        .unwrap_or_else(|| panic!("word '{word}' not in vocabulary")) as u16
}

/// Templated instruction for a task, as token ids.
pub fn instruction_tokens(task: &TaskSpec) -> Vec<u16> {
    let t = task.target_object.token();
    let r = task.target_receptacle.token();
    let words: Vec<&str> = match task.behavior {
        Behavior::Examine => vec!["examine", "the", t, "under", "the", "lamp"],
        Behavior::PickPlace => vec!["put", "the", t, "on", "the", r],
        Behavior::Heat => vec!["heat", "the", t, "then", "put", "it", "on", "the", r],
        Behavior::Cool => vec!["cool", "the", t, "then", "put", "it", "on", "the", r],
        Behavior::Clean => vec!["clean", "the", t, "then", "put", "it", "on", "the", r],
        Behavior::Pick2Place => {
            let s = task.second_object.unwrap().token();
            vec!["put", "the", t, "and", "the", s, "on", "the", r]
        }
        Behavior::Movable => vec![
            "put", "the", t, "in", "the", "box", "then", "put", "the", "box", "on", "the", r,
        ],
    };
    words.into_iter().map(token_id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_has_no_duplicates() {
        let mut seen = std::collections::HashSet::new();
        for w in VOCAB {
            assert!(seen.insert(w), "duplicate token {w}");
        }
    }

    #[test]
    fn all_object_tokens_in_vocab() {
        for c in crate::gridsim::ALL_CLASSES {
            token_id(c.token());
        }
    }
}
