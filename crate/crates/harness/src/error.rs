use pnda_core::CoreError;
use pnda_losses::LossError;
use pnda_nn::{Encoder, NnError};
use pnda_sampler::SamplerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("partition is missing {count} training ids, e.g. {example:?}")]
    PartitionCoverage { count: usize, example: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("corpus of {len} images cannot fill a batch of {batch}")]
    CorpusTooSmall { len: usize, batch: usize },
    /// `last_good` holds the encoder as of the last completed epoch, if any.
    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64, last_good: Option<Box<Encoder>> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
