use ndarray::Array2;
use pnda_core::ImageSample;
use pnda_nn::{Encoder, Module};
use sha2::{Digest, Sha256};

use crate::{LinevalError, Result};

/// Pooled encoder features, one row per image in corpus order.
///
/// The encoder is borrowed immutably, so extraction cannot change it.
pub fn extract_features(encoder: &Encoder, corpus: &[ImageSample], batch: usize) -> Result<Array2<f64>> {
    let dim = encoder.output_dim();
    if corpus.is_empty() {
        return Ok(Array2::zeros((0, dim)));
    }
    let m = encoder.embed_images(corpus, batch)?;
    Ok(Array2::from_shape_vec((m.rows, m.cols), m.to_f64()).expect("matrix shape is consistent"))
}

/// Class labels of a corpus; every image must carry one.
pub fn corpus_labels(corpus: &[ImageSample]) -> Result<Vec<usize>> {
    corpus.iter().map(|s| s.label().ok_or_else(|| LinevalError::MissingLabel(s.id().to_string()))).collect()
}

/// SHA-256 over parameter names, shapes and values.
pub fn parameter_digest(module: &dyn Module) -> String {
    let mut h = Sha256::new();
    for p in module.params() {
        h.update(p.name.as_bytes());
        for d in &p.shape {
            h.update((*d as u64).to_le_bytes());
        }
        for v in &p.value {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
