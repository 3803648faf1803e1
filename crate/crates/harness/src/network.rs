use pnda_core::ImageSample;
use pnda_nn::{images_to_tensor, Encoder, EncoderCache, EncoderSpec, Matrix, Mlp, MlpCache, Module, Param};
use rand::Rng;

use crate::Result;

/// Encoder followed by an MLP projection head.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub encoder: Encoder,
    pub projection: Mlp,
}

#[derive(Debug)]
pub struct BranchCache {
    encoder: EncoderCache,
    projection: MlpCache,
}

impl Branch {
    pub fn new<R: Rng + ?Sized>(spec: &EncoderSpec, in_channels: usize, projection: &[usize], rng: &mut R) -> Result<Self> {
        let encoder = Encoder::new(spec, in_channels, rng)?;
        let mut dims = vec![encoder.output_dim()];
        dims.extend_from_slice(projection);
        Ok(Self { projection: Mlp::new("proj", &dims, rng), encoder })
    }

    /// Raw (unnormalized) projections.
    pub fn embed(&self, images: &[ImageSample]) -> Result<Matrix> {
        let feat = self.encoder.forward(&images_to_tensor(images)?)?;
        Ok(self.projection.forward(&feat)?)
    }

    pub fn forward_train(&self, images: &[ImageSample]) -> Result<(Matrix, BranchCache)> {
        let (feat, encoder) = self.encoder.forward_train(&images_to_tensor(images)?)?;
        let (z, projection) = self.projection.forward_train(&feat)?;
        Ok((z, BranchCache { encoder, projection }))
    }

    pub fn backward(&mut self, cache: &BranchCache, dz: &Matrix) -> Result<()> {
        let dfeat = self.projection.backward(&cache.projection, dz);
        self.encoder.backward(&cache.encoder, &dfeat)?;
        Ok(())
    }
}

impl Module for Branch {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        p.extend(self.projection.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        p.extend(self.projection.params_mut());
        p
    }
}

/// The trained network: a branch plus, for BYOL, a predictor head.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineNet {
    pub branch: Branch,
    pub predictor: Option<Mlp>,
}

#[derive(Debug)]
pub struct OnlineCache {
    branch: BranchCache,
    predictor: Option<MlpCache>,
}

impl OnlineNet {
    pub fn encoder(&self) -> &Encoder {
        &self.branch.encoder
    }

    pub fn embed(&self, images: &[ImageSample]) -> Result<Matrix> {
        let z = self.branch.embed(images)?;
        match &self.predictor {
            Some(p) => Ok(p.forward(&z)?),
            None => Ok(z),
        }
    }

    pub fn forward_train(&self, images: &[ImageSample]) -> Result<(Matrix, OnlineCache)> {
        let (z, branch) = self.branch.forward_train(images)?;
        match &self.predictor {
            Some(p) => {
                let (q, pc) = p.forward_train(&z)?;
                Ok((q, OnlineCache { branch, predictor: Some(pc) }))
            }
            None => Ok((z, OnlineCache { branch, predictor: None })),
        }
    }

    pub fn backward(&mut self, cache: &OnlineCache, dz: &Matrix) -> Result<()> {
        let dz = match (&mut self.predictor, &cache.predictor) {
            (Some(p), Some(pc)) => p.backward(pc, dz),
            _ => dz.clone(),
        };
        self.branch.backward(&cache.branch, &dz)
    }
}

impl Module for OnlineNet {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.branch.params();
        if let Some(pred) = &self.predictor {
            p.extend(pred.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.branch.params_mut();
        if let Some(pred) = &mut self.predictor {
            p.extend(pred.params_mut());
        }
        p
    }
}
