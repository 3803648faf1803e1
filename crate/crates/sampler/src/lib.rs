//! Unsupervised extraction of rotation-agnostic images (RAI).
//!
//! A rotation predictor is trained in two steps on rotation-expanded batches:
//! first plain 4-way rotation classification, then entropy-gated
//! classification plus an entropy separation term that pushes confident
//! predictions down and uncertain ones up. Each image is then scored by its
//! mean prediction entropy over the four rotations, and images scoring above
//! `rho + m` are marked RAI.

mod config;
mod error;
mod model;
pub mod objective;
mod partition;
mod pipeline;
mod score;
mod train;

pub use config::{Beta1, SamplerConfig};
pub use error::SamplerError;
pub use model::{PredictorCache, RotationModel, RotationPredictor};
pub use objective::{
    lambda_at, loss_crs, loss_crs_filtered, loss_es, step1_objective_grad, step2_objective, step2_objective_grad,
};
pub use partition::{partition, PartitionMeta, RaiPartition, ScoreRecord};
pub use pipeline::{run_sampler, SamplerRun};
pub use score::{
    evaluate, rotation_accuracy, score, score_gap, tune_check, Evaluation, ScoreHistogram, HISTOGRAM_BIN_WIDTH,
};
pub use train::{detect_overfit_epoch, init_predictor, overfit_probe, train_step1, train_step2, ProbeReport, TrainReport};

pub type Result<T, E = SamplerError> = std::result::Result<T, E>;
