use pnda_core::{ImageSample, ProbVector};
use pnda_nn::{images_to_tensor, Encoder, EncoderCache, EncoderSpec, Linear, LinearCache, Matrix, Module, Param};
use rand::Rng;

use crate::Result;

/// Anything that maps images to 4 rotation logits. Scoring only needs this,
/// so tests can plug in hand-built stubs.
pub trait RotationModel {
    fn rotation_logits(&self, images: &[ImageSample]) -> Result<Vec<[f64; 4]>>;

    fn rotation_probs(&self, images: &[ImageSample]) -> Result<Vec<ProbVector>> {
        Ok(self.rotation_logits(images)?.into_iter().map(ProbVector::from_logits).collect())
    }
}

/// Feature extractor `G` followed by a linear 4-way rotation head `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationPredictor {
    pub encoder: Encoder,
    pub head: Linear,
}

/// Saved activations of [`RotationPredictor::forward_train`].
#[derive(Debug)]
pub struct PredictorCache {
    encoder: EncoderCache,
    head: LinearCache,
}

impl RotationPredictor {
    pub fn new<R: Rng + ?Sized>(spec: &EncoderSpec, in_channels: usize, rng: &mut R) -> Result<Self> {
        let encoder = Encoder::new(spec, in_channels, rng)?;
        let head = Linear::new("head", encoder.output_dim(), 4, 1.0, rng);
        Ok(Self { encoder, head })
    }

    pub fn forward_train(&self, images: &[ImageSample]) -> Result<(Matrix, PredictorCache)> {
        let x = images_to_tensor(images)?;
        let (feat, encoder) = self.encoder.forward_train(&x)?;
        let (logits, head) = self.head.forward_train(&feat)?;
        Ok((logits, PredictorCache { encoder, head }))
    }

    pub fn backward(&mut self, cache: &PredictorCache, dlogits: &Matrix) -> Result<()> {
        let dfeat = self.head.backward(&cache.head, dlogits);
        self.encoder.backward(&cache.encoder, &dfeat)?;
        Ok(())
    }
}

pub(crate) fn logits_rows(m: &Matrix) -> Vec<[f64; 4]> {
    (0..m.rows).map(|i| std::array::from_fn(|k| m.row(i)[k] as f64)).collect()
}

impl RotationModel for RotationPredictor {
    fn rotation_logits(&self, images: &[ImageSample]) -> Result<Vec<[f64; 4]>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let feat = self.encoder.forward(&images_to_tensor(images)?)?;
        Ok(logits_rows(&self.head.forward(&feat)?))
    }
}

impl Module for RotationPredictor {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}
