use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use pnda_losses::{AugMode, DEFAULT_ALPHA, DEFAULT_TAU_MOCO, DEFAULT_TAU_SIMCLR};
use pnda_nn::{EncoderSpec, LrSchedule, OptimizerSpec};
use serde::{Deserialize, Serialize};

use crate::{AugmentRecipe, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Simclr,
    MocoV2,
    Byol,
}

impl Framework {
    pub const ALL: [Framework; 3] = [Framework::Simclr, Framework::MocoV2, Framework::Byol];

    pub fn as_str(self) -> &'static str {
        match self {
            Framework::Simclr => "simclr",
            Framework::MocoV2 => "moco_v2",
            Framework::Byol => "byol",
        }
    }

    pub fn default_tau(self) -> Option<f64> {
        match self {
            Framework::Simclr => Some(DEFAULT_TAU_SIMCLR),
            Framework::MocoV2 => Some(DEFAULT_TAU_MOCO),
            Framework::Byol => None,
        }
    }

    pub fn default_optimizer(self) -> OptimizerSpec {
        match self {
            Framework::Simclr => OptimizerSpec::lars(0.2, 1e-6),
            Framework::MocoV2 | Framework::Byol => OptimizerSpec::sgd(0.125, 0.9, 1e-4),
        }
    }

    pub fn default_schedule(self) -> LrSchedule {
        match self {
            Framework::Simclr => LrSchedule::Cosine { warmup_epochs: 10.0 },
            Framework::MocoV2 | Framework::Byol => LrSchedule::Cosine { warmup_epochs: 0.0 },
        }
    }

    pub fn uses_target_network(self) -> bool {
        self != Framework::Simclr
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Framework {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simclr" => Ok(Framework::Simclr),
            "moco_v2" | "mocov2" | "moco" => Ok(Framework::MocoV2),
            "byol" => Ok(Framework::Byol),
            other => Err(HarnessError::Config(format!("unknown framework {other:?}"))),
        }
    }
}

/// One pretraining run. `None` fields take framework defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub framework: Framework,
    pub mode: AugMode,
    /// Partition table; required under PNDA.
    pub partition: Option<PathBuf>,
    pub encoder: EncoderSpec,
    /// Projection head widths after the encoder; the last is the embedding size.
    pub projection: Vec<usize>,
    /// BYOL predictor widths; the last must equal the embedding size.
    pub predictor: Vec<usize>,
    pub tau: Option<f64>,
    pub alpha: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: Option<OptimizerSpec>,
    pub schedule: Option<LrSchedule>,
    pub ema_momentum: f64,
    pub queue_size: usize,
    pub augment: AugmentRecipe,
    pub seed: u64,
    /// Number of leading steps whose pair specs are recorded.
    pub spec_dump_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            framework: Framework::Simclr,
            mode: AugMode::None,
            partition: None,
            encoder: EncoderSpec::default(),
            projection: vec![128, 128],
            predictor: vec![128, 128],
            tau: None,
            alpha: DEFAULT_ALPHA,
            batch_size: 32,
            epochs: 20,
            optimizer: None,
            schedule: None,
            ema_momentum: 0.999,
            queue_size: 4096,
            augment: AugmentRecipe::default(),
            seed: 0,
            spec_dump_steps: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn tau(&self) -> Option<f64> {
        match self.framework {
            Framework::Byol => None,
            f => self.tau.or(f.default_tau()),
        }
    }

    pub fn optimizer(&self) -> OptimizerSpec {
        self.optimizer.clone().unwrap_or_else(|| self.framework.default_optimizer())
    }

    pub fn schedule(&self) -> LrSchedule {
        self.schedule.clone().unwrap_or_else(|| self.framework.default_schedule())
    }

    pub fn embedding_dim(&self) -> usize {
        *self.projection.last().unwrap_or(&0)
    }

    /// Checks everything that does not need the corpus or partition contents.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.mode.needs_partition() && self.partition.is_none() {
            return bad("mode pnda requires a partition path".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch size must be at least 2, got {}", self.batch_size));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.projection.is_empty() || self.projection.contains(&0) {
            return bad("projection widths must be non-empty and positive".into());
        }
        if let Some(tau) = self.tau() {
            if !(tau.is_finite() && tau > 0.0) {
                return bad(format!("temperature must be positive, got {tau}"));
            }
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if self.framework.uses_target_network() && !(0.0..1.0).contains(&self.ema_momentum) {
            return bad(format!("EMA momentum must lie in [0, 1), got {}", self.ema_momentum));
        }
        if self.framework == Framework::MocoV2 && self.queue_size < self.batch_size {
            return bad(format!("queue size {} is smaller than batch size {}", self.queue_size, self.batch_size));
        }
        if self.framework == Framework::Byol
            && (self.predictor.is_empty() || self.predictor.contains(&0) || self.predictor.last() != self.projection.last())
        {
            return bad("BYOL predictor must end at the embedding width".into());
        }
        self.optimizer().validate()?;
        self.encoder.validate()?;
        self.augment.validate()?;
        Ok(())
    }
}
