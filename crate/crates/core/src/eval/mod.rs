//! Training objective, optimizer, schedule, scoring and the toy trainer.

pub mod aam;
pub mod adam;
pub mod schedule;
pub mod scoring;
pub mod train;

pub use aam::{aam_softmax_loss, AamConfig};
pub use adam::{adam_step, AdamState};
pub use schedule::{cosine_lr, ScheduleConfig};
pub use scoring::{compute_eer, cosine_score, Eer, Trial, TrialSet};
pub use train::{synth_dataset, train_toy, Dataset, EpochMetrics, SynthConfig, TrainConfig, TrainOutcome};
