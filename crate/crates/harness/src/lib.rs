//! Contrastive pretraining at desk scale.
//!
//! Each step draws `M` images, makes two augmented views of each and, when
//! the augmentation mode uses rotations, adds rotated views whose role
//! (positive or negative) follows the mode and, under PNDA, the image's
//! sampled verdict. Batches and rotation angles come from RNG streams that
//! are independent of the mode, so runs that differ only in mode see the
//! same images in the same order.

mod augment;
mod config;
mod ema;
mod error;
mod network;
mod plan;
mod pretrain;
mod queue;
mod synthetic;

pub use augment::{augment, AugmentRecipe};
pub use config::{ExperimentConfig, Framework};
pub use ema::{momentum_update, momentum_update_slice};
pub use error::HarnessError;
pub use network::{Branch, BranchCache, OnlineCache, OnlineNet};
pub use plan::{plan_batches, BatchPlan};
pub use pretrain::{pretrain, write_metrics_jsonl, PreparedBatch, PretrainOutcome, Pretrainer, StepRecord};
pub use queue::KeyQueue;
pub use synthetic::{generate_synthetic_corpus, Family, SyntheticCorpusSpec};

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
