//! Desk-scale online task-free continual imitation learning on a symbolic
//! grid world.
//!
//! The crate is organized around the training pipeline:
//!
//! - [`gridsim`]: deterministic 7x7 grid simulator (layouts, objects,
//!   interaction mechanics, observations, goal checking)
//! - [`expert`]: scripted planner producing successful expert demonstrations
//! - [`streamgen`]: behavior-incremental / environment-incremental benchmark
//!   construction and the online, boundary-free episode stream
//! - [`nnkit`]: minimal tensor/autodiff engine with Adam and the exponential
//!   reset learning-rate schedule
//! - [`policy`]: dual-head recurrent instruction-following agent
//! - [`clmethods`]: episodic memory, confidence-aware logit updates (CAMA),
//!   and continual-learning baselines
//! - [`bench`]: evaluation, incremental metric aggregation, experiment
//!   orchestration and reporting

pub mod bench;
pub mod clmethods;
pub mod error;
pub mod expert;
pub mod gridsim;
pub mod nnkit;
pub mod policy;
pub mod streamgen;

pub use error::{Error, Result};
