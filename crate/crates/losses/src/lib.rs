//! Contrastive objectives evaluated on L2-normalized embeddings, each paired
//! with its analytic gradient, plus the positive/negative set constructors
//! that decide how rotated views of an anchor enter the loss.
//!
//! All arithmetic is `f64`. Gradients are with respect to the normalized
//! embeddings; [`l2_normalize_backward`] carries them back to raw network
//! outputs.

mod byol;
mod embedding;
mod error;
mod info_nce;
mod sets;

pub use byol::{byol_loss, byol_loss_grad, pnda_byol_loss, pnda_byol_loss_grad, ByolGrad, DEFAULT_ALPHA};
pub use embedding::{l2_normalize_backward, l2_normalize_rows, EmbeddingBatch, UNIT_NORM_TOLERANCE};
pub use error::LossError;
pub use info_nce::{
    batch_pnda_info_nce, info_nce, info_nce_grad, pnda_info_nce, pnda_info_nce_grad, InfoNceGrad,
    DEFAULT_TAU_MOCO, DEFAULT_TAU_SIMCLR,
};
pub use sets::{build_sets_moco, build_sets_simclr, draw_rotation_pair, AugMode, MocoLayout, PairSpec, SimclrLayout};

pub type Result<T, E = LossError> = std::result::Result<T, E>;
