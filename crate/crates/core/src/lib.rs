//! Core domain types shared by the sampler, the contrastive losses and the
//! training harness: square images, the four-element rotation group, the
//! rotation-prediction probability vector and its entropy.

mod error;
mod image;
mod prob;
mod rotation;
mod verdict;

pub use error::CoreError;
pub use image::{expand_with_rotations, ImageSample};
pub use prob::{entropy, entropy_of, softmax4, ProbVector, DEFAULT_RHO, ENTROPY_CLAMP, MAX_ENTROPY};
pub use rotation::{rotate, rotate_hwc, Rotation};
pub use verdict::Verdict;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
