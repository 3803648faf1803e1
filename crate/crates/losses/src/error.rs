use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("alpha must be non-negative, got {0}")]
    Alpha(f64),
    #[error("at least one negative is required")]
    NoNegatives,
    #[error("positive set is empty")]
    NoPositives,
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("embedding {index} has norm {norm}, expected 1")]
    NotUnitNorm { index: usize, norm: f64 },
    #[error("invalid pair spec: {0}")]
    InvalidSpec(String),
    #[error("rotated positive and rotated negative sets cannot both be non-empty")]
    BothRotatedSets,
    #[error("batch size {0} is too small, need at least 2")]
    BatchTooSmall(usize),
    #[error("memory queue is empty")]
    EmptyQueue,
    #[error("rotated views are required for this treatment but the layout has none")]
    MissingRotatedViews,
    #[error("layout carries rotated views but no rotation treatment was given")]
    UnexpectedRotatedViews,
    #[error("rotation angles must be two distinct non-identity rotations, got {0} and {1}")]
    InvalidAngles(u32, u32),
    #[error("anchor {anchor} out of range for {len} anchors")]
    AnchorOutOfRange { anchor: usize, len: usize },
    #[error("no verdict available for the anchor image under PNDA")]
    MissingVerdict,
    #[error("unknown augmentation mode {0:?} (expected none, pda, nda or pnda)")]
    UnknownMode(String),
}
