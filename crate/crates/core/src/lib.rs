//! Performance-gap minimization for transfer and multitask learning over
//! linear hypothesis classes.
//!
//! The crate provides weighted linear learners, gap calculators and
//! complexity-bound checks for instance weighting, hypothesis transfer and
//! three linear multitask formulations, the gap-minimizing boosting
//! algorithms with their baselines, synthetic benchmark generators, and an
//! experiment harness.

pub mod boost;
pub mod datagen;
pub mod error;
pub mod gaptheory;
pub mod harness;
pub mod learners;
mod linalg;
pub mod loss;
pub mod model;
pub mod multitask;
pub mod verify;

pub use error::{Error, Result};
pub use learners::{train_weighted, weighted_error, TaskMode, TrainSpec};
pub use loss::{loss, LossKind, LossSpec};
pub use model::{predict, sign_label, BoundInputs, DomainTag, Example, LinearHypothesis, Sample, WeightVector};
