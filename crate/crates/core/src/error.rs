use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("image must be square, got {height}x{width}")]
    NonSquare { height: usize, width: usize },
    #[error("pixel buffer has {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("pixel {index} = {value} is outside [0, 1]")]
    PixelRange { index: usize, value: f32 },
    #[error("image must have at least one channel and one pixel")]
    EmptyImage,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid rotation: {0} degrees (expected 0, 90, 180 or 270)")]
    InvalidRotation(i64),
    #[error("probability vector is not normalized: {reason}")]
    NotNormalized { reason: String },
    #[error("invalid verdict {0:?} (expected RAI or NON_RAI)")]
    InvalidVerdict(String),
}
