use pnda_core::CoreError;
use pnda_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{what}: {left} vs {right} elements")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("epoch {epoch} outside [1, {beta2}]")]
    EpochOutOfRange { epoch: usize, beta2: usize },
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error("{stage} diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { stage: &'static str, epoch: usize, step: usize, loss: f64 },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),
    #[error("score for {id:?} is not finite: {score}")]
    NonFiniteScore { id: String, score: f64 },
    #[error("ratio {0} outside [0, 1]")]
    Ratio(f64),
    #[error("malformed partition file, line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
