//! Online task-free continual-learning core: reservoir episodic memory,
//! confidence queues with the moving-average logit update, and the method
//! zoo (finetune, ER, EWC++, DER++, the confidence-aware update and its
//! fixed-coefficient ablation, joint upper bound).

mod cama;
mod memory;
mod train;

pub use cama::{
    compute_gamma, gamma_scalar, push_confidences, update_logits, update_logits_oriented,
    ConfidenceQueues,
};
pub use memory::{reservoir_insert, EpisodicMemory, MemoryEntry};
pub use train::{
    gt_confidence, run_continual_training, train_step, EwcState, Method, MethodConfig, RunOutput,
    StepLog, TraceEntry, TrainerState,
};
