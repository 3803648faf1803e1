use serde::{Deserialize, Serialize};

use crate::{NnError, Param, Result};

/// Optimizer family and its hyperparameters. `lr` is the base rate that a
/// [`LrSchedule`] scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Sgd {
        lr: f64,
        #[serde(default)]
        momentum: f64,
        #[serde(default)]
        weight_decay: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default)]
        weight_decay: f64,
    },
    /// SGD with momentum and layer-wise trust ratio. One-dimensional
    /// parameters (biases) skip both weight decay and the trust ratio.
    Lars {
        lr: f64,
        #[serde(default = "default_momentum")]
        momentum: f64,
        #[serde(default)]
        weight_decay: f64,
        #[serde(default = "default_trust")]
        trust_coefficient: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_momentum() -> f64 {
    0.9
}
fn default_trust() -> f64 {
    0.001
}

impl OptimizerSpec {
    pub fn adam(lr: f64) -> Self {
        OptimizerSpec::Adam { lr, beta1: default_beta1(), beta2: default_beta2(), eps: default_eps(), weight_decay: 0.0 }
    }

    pub fn sgd(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        OptimizerSpec::Sgd { lr, momentum, weight_decay }
    }

    pub fn lars(lr: f64, weight_decay: f64) -> Self {
        OptimizerSpec::Lars { lr, momentum: default_momentum(), weight_decay, trust_coefficient: default_trust() }
    }

    pub fn lr(&self) -> f64 {
        match self {
            OptimizerSpec::Sgd { lr, .. } | OptimizerSpec::Adam { lr, .. } | OptimizerSpec::Lars { lr, .. } => *lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.lr();
        if !(lr.is_finite() && lr > 0.0) {
            return Err(NnError::Config(format!("learning rate must be positive, got {lr}")));
        }
        let ok = match *self {
            OptimizerSpec::Sgd { momentum, weight_decay, .. } => (0.0..1.0).contains(&momentum) && weight_decay >= 0.0,
            OptimizerSpec::Adam { beta1, beta2, eps, weight_decay, .. } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0 && weight_decay >= 0.0
            }
            OptimizerSpec::Lars { momentum, weight_decay, trust_coefficient, .. } => {
                (0.0..1.0).contains(&momentum) && weight_decay >= 0.0 && trust_coefficient > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(format!("invalid optimizer hyperparameters: {self:?}")))
        }
    }
}

/// Learning-rate multiplier as a function of (fractional) epochs elapsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Linear warmup followed by half-period cosine decay to zero.
    Cosine {
        #[serde(default)]
        warmup_epochs: f64,
    },
    /// Multiply by `gamma` at each fraction of the total run.
    Milestones { fractions: Vec<f64>, gamma: f64 },
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Cosine { warmup_epochs: 0.0 }
    }
}

impl LrSchedule {
    pub fn factor(&self, epoch: f64, total_epochs: f64) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { warmup_epochs } => {
                let w = warmup_epochs.min(total_epochs);
                if epoch < w {
                    (epoch + 1.0).min(w) / w
                } else if total_epochs <= w {
                    1.0
                } else {
                    let t = ((epoch - w) / (total_epochs - w)).clamp(0.0, 1.0);
                    0.5 * (1.0 + (std::f64::consts::PI * t).cos())
                }
            }
            LrSchedule::Milestones { fractions, gamma } => {
                let passed = fractions.iter().filter(|f| epoch >= *f * total_epochs).count();
                gamma.powi(passed as i32)
            }
        }
    }
}

/// Stateful optimizer. State slots follow the order of the parameter list,
/// which must not change between steps.
#[derive(Debug, Clone)]
pub struct Optimizer {
    spec: OptimizerSpec,
    first: Vec<Vec<f32>>,
    second: Vec<Vec<f32>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, first: Vec::new(), second: Vec::new(), steps: 0 })
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update at learning rate `lr` using the accumulated grads.
    pub fn step(&mut self, params: Vec<&mut Param>, lr: f64) -> Result<()> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            if matches!(self.spec, OptimizerSpec::Adam { .. }) {
                self.second = self.first.clone();
            }
        }
        if self.first.len() != params.len() || params.iter().zip(&self.first).any(|(p, s)| p.len() != s.len()) {
            return Err(NnError::Shape("parameter list changed between optimizer steps".into()));
        }
        self.steps += 1;
        let lr = lr as f32;
        match self.spec {
            OptimizerSpec::Sgd { momentum, weight_decay, .. } => {
                let (mu, wd) = (momentum as f32, weight_decay as f32);
                for (p, buf) in params.into_iter().zip(&mut self.first) {
                    for ((w, g), b) in p.value.iter_mut().zip(&p.grad).zip(buf.iter_mut()) {
                        let d = g + wd * *w;
                        *b = mu * *b + d;
                        *w -= lr * *b;
                    }
                }
            }
            OptimizerSpec::Adam { beta1, beta2, eps, weight_decay, .. } => {
                let (b1, b2, eps, wd) = (beta1 as f32, beta2 as f32, eps as f32, weight_decay as f32);
                let c1 = 1.0 - beta1.powi(self.steps as i32) as f32;
                let c2 = 1.0 - beta2.powi(self.steps as i32) as f32;
                for ((p, m), v) in params.into_iter().zip(&mut self.first).zip(&mut self.second) {
                    for (((w, g), m), v) in p.value.iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                        let d = g + wd * *w;
                        *m = b1 * *m + (1.0 - b1) * d;
                        *v = b2 * *v + (1.0 - b2) * d * d;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
            OptimizerSpec::Lars { momentum, weight_decay, trust_coefficient, .. } => {
                let mu = momentum as f32;
                for (p, buf) in params.into_iter().zip(&mut self.first) {
                    let adapt = p.shape.len() > 1;
                    let wd = if adapt { weight_decay as f32 } else { 0.0 };
                    let local = if adapt {
                        let wn = norm(&p.value);
                        let gn = norm(&p.grad);
                        if wn > 0.0 && gn > 0.0 {
                            (trust_coefficient * wn / (gn + weight_decay * wn)) as f32
                        } else {
                            1.0
                        }
                    } else {
                        1.0
                    };
                    for ((w, g), b) in p.value.iter_mut().zip(&p.grad).zip(buf.iter_mut()) {
                        *b = mu * *b + local * (g + wd * *w);
                        *w -= lr * *b;
                    }
                }
            }
        }
        Ok(())
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt()
}
