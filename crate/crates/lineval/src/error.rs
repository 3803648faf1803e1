use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinevalError {
    #[error(transparent)]
    Nn(#[from] pnda_nn::NnError),
    #[error("invalid probe config: {0}")]
    Config(String),
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("linear probe needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("image {0} has no class label")]
    MissingLabel(String),
    #[error("feature matrix contains a non-finite value at row {0}")]
    NonFinite(usize),
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("probe diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("results line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
