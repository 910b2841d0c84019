#![no_std]
#![forbid(unsafe_code)]

//! Feature partition and fusion for lightweight speaker embedding models.
//!
//! The crate is `no_std` and only needs `alloc`. It holds the numerical
//! pieces: a small channels-by-frames tensor with a reverse-mode tape, the
//! partition planner, the transformation module (TM) that splits a feature
//! into subsets and re-injects cross-subset context, a TM-augmented block
//! stack, exact parameter/MAC accounting, a log-Mel front end, and a toy
//! training/evaluation loop (AAM-Softmax, Adam, warm-up cosine schedule,
//! cosine scoring and EER).
//!
//! File formats, WAV parsing and the command line live in the `tmfuse`
//! companion crate.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod complexity;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod model;
pub mod partition;
pub mod real;
pub mod tape;
pub mod tensor;
pub mod tm;

pub use error::{Error, Result};
pub use complexity::{count_macs, count_params, ComplexityReport};
pub use model::{build_model, model_forward, BlockSpec, ModelConfig, ModelGraph, TmSpec};
pub use partition::{plan_partition, PartitionPlan};
pub use real::Real;
pub use tensor::{ConvParams, FeatureMatrix};
pub use tm::{tm_forward, tm_init, TmParams};

/// Additive guard used in every normalizing denominator.
pub const EPS: f64 = 1e-8;
