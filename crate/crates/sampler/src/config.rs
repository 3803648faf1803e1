use pnda_core::DEFAULT_RHO;
use pnda_nn::{EncoderSpec, LrSchedule, OptimizerSpec};
use serde::{Deserialize, Serialize};

use crate::{Result, SamplerError};

/// Step-1 length: a fixed epoch count, or `"auto"` to run the overfitting
/// probe first and use its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beta1 {
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Beta1Repr {
    Epochs(usize),
    Word(String),
}

impl Serialize for Beta1 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta1::Auto => Beta1Repr::Word("auto".into()),
            Beta1::Fixed(n) => Beta1Repr::Epochs(*n),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Beta1 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Beta1Repr::deserialize(d)? {
            Beta1Repr::Epochs(n) => Ok(Beta1::Fixed(n)),
            Beta1Repr::Word(w) if w == "auto" => Ok(Beta1::Auto),
            Beta1Repr::Word(w) => Err(serde::de::Error::custom(format!("beta1 must be an epoch count or \"auto\", got {w:?}"))),
        }
    }
}

/// Hyperparameters of the two-step sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Step-1 epochs.
    pub beta1: Beta1,
    /// Step-2 epochs.
    pub beta2: usize,
    /// Cap of the separation weight, reached at the last Step-2 epoch.
    pub lambda_prime: f64,
    pub margin: f64,
    pub rho: f64,
    pub optimizer: OptimizerSpec,
    pub schedule: LrSchedule,
    /// Source images per step; each step trains on `4 * batch_size` rotated inputs.
    pub batch_size: usize,
    pub seed: u64,
    pub encoder: EncoderSpec,
    pub probe_max_epochs: usize,
    pub probe_train_fraction: f64,
    pub probe_window: usize,
    pub tune_tolerance: f64,
    /// Images per forward pass when scoring.
    pub eval_batch_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            beta1: Beta1::Fixed(10),
            beta2: 200,
            lambda_prime: 0.20,
            margin: 0.20,
            rho: DEFAULT_RHO,
            optimizer: OptimizerSpec::adam(0.001),
            schedule: LrSchedule::Cosine { warmup_epochs: 0.0 },
            batch_size: 64,
            seed: 0,
            encoder: EncoderSpec::default(),
            probe_max_epochs: 30,
            probe_train_fraction: 0.8,
            probe_window: 3,
            tune_tolerance: 0.01,
            eval_batch_size: 128,
        }
    }
}

impl SamplerConfig {
    /// Tiny-ImageNet-style preset: longer Step 2 with a smaller separation weight.
    pub fn tiny_imagenet() -> Self {
        Self {
            beta2: 150,
            lambda_prime: 0.10,
            optimizer: OptimizerSpec::sgd(0.1, 0.9, 0.0),
            ..Self::default()
        }
    }

    /// RAI verdict threshold `rho + m`; scores strictly above it are RAI.
    pub fn threshold(&self) -> f64 {
        self.rho + self.margin
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SamplerError::Config(msg));
        if self.beta1 == Beta1::Fixed(0) {
            return bad("beta1 must be at least 1".into());
        }
        if self.beta2 == 0 {
            return bad("beta2 must be at least 1".into());
        }
        if !(self.lambda_prime.is_finite() && self.lambda_prime > 0.0) {
            return bad(format!("lambda_prime must be positive, got {}", self.lambda_prime));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.margin > 0.0 && self.margin < self.rho) {
            return bad(format!("margin must lie in (0, rho={}), got {}", self.rho, self.margin));
        }
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return bad("batch sizes must be at least 1".into());
        }
        if self.probe_max_epochs == 0 || self.probe_window == 0 {
            return bad("probe_max_epochs and probe_window must be at least 1".into());
        }
        if !(self.probe_train_fraction > 0.0 && self.probe_train_fraction < 1.0) {
            return bad(format!("probe_train_fraction must lie in (0, 1), got {}", self.probe_train_fraction));
        }
        if !(self.tune_tolerance.is_finite() && self.tune_tolerance >= 0.0) {
            return bad(format!("tune_tolerance must be non-negative, got {}", self.tune_tolerance));
        }
        self.optimizer.validate()?;
        self.encoder.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SamplerConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.beta1, Beta1::Fixed(10));
        assert_eq!(cfg.beta2, 200);
        assert!((cfg.threshold() - 0.893147).abs() < 1e-6);
        let tiny = SamplerConfig::tiny_imagenet();
        tiny.validate().unwrap();
        assert_eq!((tiny.beta2, tiny.lambda_prime), (150, 0.10));
    }

    #[test]
    fn invariants_are_enforced() {
        for cfg in [
            SamplerConfig { beta1: Beta1::Fixed(0), ..Default::default() },
            SamplerConfig { beta2: 0, ..Default::default() },
            SamplerConfig { margin: 0.0, ..Default::default() },
            SamplerConfig { margin: 0.7, ..Default::default() },
            SamplerConfig { lambda_prime: 0.0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn partial_json_fills_defaults_and_rejects_unknown_keys() {
        let cfg: SamplerConfig = serde_json::from_str(r#"{"beta2": 40, "beta1": "auto"}"#).unwrap();
        assert_eq!(cfg.beta2, 40);
        assert_eq!(cfg.beta1, Beta1::Auto);
        let fixed: SamplerConfig = serde_json::from_str(r#"{"beta1": 7}"#).unwrap();
        assert_eq!(fixed.beta1, Beta1::Fixed(7));
        assert_eq!(serde_json::to_string(&Beta1::Auto).unwrap(), r#""auto""#);
        assert!(serde_json::from_str::<Beta1>(r#""soon""#).is_err());
        assert_eq!(cfg.margin, 0.2);
        assert!(serde_json::from_str::<SamplerConfig>(r#"{"betta2": 40}"#).is_err());
    }
}
