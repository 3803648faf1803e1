use log::{info, warn};
use pnda_core::{expand_with_rotations, ImageSample, Rotation};
use pnda_nn::{Matrix, Module, Optimizer};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::logits_rows;
use crate::objective::{step1_objective_grad, step2_objective_grad, LogitGrad};
use crate::score::{evaluate, Evaluation};
use crate::{Result, RotationPredictor, SamplerConfig, SamplerError};

/// Loss trace and post-training evaluation of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub evaluation: Evaluation,
}

impl TrainReport {
    pub fn accuracy(&self) -> f64 {
        self.evaluation.accuracy
    }
}

const STEP1_STREAM: u64 = 0x5354_4550_3100_0000;
const STEP2_STREAM: u64 = 0x5354_4550_3200_0000;
const PROBE_STREAM: u64 = 0x5052_4f42_4500_0000;

/// A fresh predictor for `corpus`, initialised from `cfg.seed`.
pub fn init_predictor(corpus: &[ImageSample], cfg: &SamplerConfig) -> Result<RotationPredictor> {
    let first = corpus.first().ok_or(SamplerError::EmptyCorpus)?;
    RotationPredictor::new(&cfg.encoder, first.channels(), &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

type Objective<'a> = dyn Fn(&[[f64; 4]], &[Rotation], usize, usize) -> Result<(f64, Vec<LogitGrad>)> + 'a;

/// Runs `epochs` epochs of minibatch training on rotation-expanded batches and
/// returns the mean loss per epoch. `on_epoch` sees the 1-based epoch after
/// it completes and may return `false` to stop early.
fn run_stage(
    model: &mut RotationPredictor,
    corpus: &[ImageSample],
    cfg: &SamplerConfig,
    epochs: usize,
    stage: &'static str,
    stream: u64,
    objective: &Objective<'_>,
    on_epoch: &mut dyn FnMut(usize, &RotationPredictor) -> Result<bool>,
) -> Result<Vec<f64>> {
    if corpus.is_empty() {
        return Err(SamplerError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stream);
    let mut opt = Optimizer::new(cfg.optimizer.clone())?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let steps = corpus.len().div_ceil(cfg.batch_size);
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<ImageSample> = chunk.iter().map(|&i| corpus[i].clone()).collect();
            let (images, labels): (Vec<_>, Vec<_>) = expand_with_rotations(&batch)?.into_iter().unzip();
            model.zero_grad();
            let (logits, cache) = model.forward_train(&images)?;
            let rows = logits_rows(&logits);
            let (loss, grads) = objective(&rows, &labels, batch.len(), epoch)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(SamplerError::Diverged { stage, epoch, step, loss });
            }
            let dlogits = Matrix::from_vec(rows.len(), 4, grads.iter().flatten().map(|g| *g as f32).collect())?;
            model.backward(&cache, &dlogits)?;
            let progress = (epoch - 1) as f64 + step as f64 / steps as f64;
            let lr = cfg.optimizer.lr() * cfg.schedule.factor(progress, epochs as f64);
            opt.step(model.params_mut(), lr)?;
            total += loss;
        }
        let mean = total / steps as f64;
        info!("{stage} epoch {epoch}/{epochs}: loss {mean:.6}");
        losses.push(mean);
        if !on_epoch(epoch, model)? {
            break;
        }
    }
    Ok(losses)
}

/// Step 1: plain rotation prediction over all images for `epochs` epochs.
pub fn train_step1(
    model: &mut RotationPredictor,
    corpus: &[ImageSample],
    cfg: &SamplerConfig,
    epochs: usize,
) -> Result<TrainReport> {
    if epochs == 0 {
        return Err(SamplerError::Config("step 1 needs at least one epoch".into()));
    }
    let objective = |l: &[[f64; 4]], y: &[Rotation], b: usize, _: usize| step1_objective_grad(l, y, b);
    let epoch_losses = run_stage(model, corpus, cfg, epochs, "step1", STEP1_STREAM, &objective, &mut |_, _| Ok(true))?;
    let evaluation = evaluate(model, corpus, cfg.eval_batch_size)?;
    info!("step1 rotation accuracy {:.4}", evaluation.accuracy);
    Ok(TrainReport { epoch_losses, evaluation })
}

/// Step 2: gated cross-entropy plus ramped entropy separation for `beta2`
/// epochs, continuing from the Step-1 weights.
pub fn train_step2(model: &mut RotationPredictor, corpus: &[ImageSample], cfg: &SamplerConfig) -> Result<TrainReport> {
    let objective = |l: &[[f64; 4]], y: &[Rotation], b: usize, e: usize| step2_objective_grad(l, y, b, e, cfg);
    let epoch_losses =
        run_stage(model, corpus, cfg, cfg.beta2, "step2", STEP2_STREAM, &objective, &mut |_, _| Ok(true))?;
    let evaluation = evaluate(model, corpus, cfg.eval_batch_size)?;
    info!("step2 rotation accuracy {:.4}", evaluation.accuracy);
    Ok(TrainReport { epoch_losses, evaluation })
}

/// Per-epoch accuracies of the overfitting probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Suggested Step-1 length.
    pub epoch: usize,
    /// False when validation never degraded and `epoch` is the cap.
    pub degraded: bool,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    (window..=values.len()).map(|end| values[end - window..end].iter().sum::<f64>() / window as f64).collect()
}

/// First 1-based epoch `e` whose successor has lower validation accuracy,
/// both averaged over the trailing `window` epochs. Epochs without a full
/// window are never returned.
pub fn detect_overfit_epoch(val_accuracy: &[f64], window: usize) -> Option<usize> {
    let s = smoothed(val_accuracy, window.max(1));
    s.windows(2).position(|w| w[1] < w[0]).map(|i| i + window.max(1))
}

/// Trains a fresh predictor on a seeded split of `train_fraction` of the
/// corpus and tracks rotation accuracy on the remainder, stopping as soon as
/// the smoothed validation accuracy drops.
pub fn overfit_probe(corpus: &[ImageSample], cfg: &SamplerConfig, max_epochs: usize) -> Result<ProbeReport> {
    if corpus.len() < 2 {
        return Err(SamplerError::Config("overfit probe needs at least two images".into()));
    }
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ PROBE_STREAM));
    let cut = ((corpus.len() as f64 * cfg.probe_train_fraction).floor() as usize).clamp(1, corpus.len() - 1);
    let train: Vec<ImageSample> = idx[..cut].iter().map(|&i| corpus[i].clone()).collect();
    let val: Vec<ImageSample> = idx[cut..].iter().map(|&i| corpus[i].clone()).collect();

    let mut model = init_predictor(corpus, cfg)?;
    let mut train_acc = Vec::new();
    let mut val_acc = Vec::new();
    let objective = |l: &[[f64; 4]], y: &[Rotation], b: usize, _: usize| step1_objective_grad(l, y, b);
    let window = cfg.probe_window;
    run_stage(&mut model, &train, cfg, max_epochs, "probe", PROBE_STREAM, &objective, &mut |epoch, m| {
        train_acc.push(evaluate(m, &train, cfg.eval_batch_size)?.accuracy);
        val_acc.push(evaluate(m, &val, cfg.eval_batch_size)?.accuracy);
        info!("probe epoch {epoch}: train acc {:.4}, val acc {:.4}", train_acc[epoch - 1], val_acc[epoch - 1]);
        Ok(detect_overfit_epoch(&val_acc, window).is_none())
    })?;
    match detect_overfit_epoch(&val_acc, window) {
        Some(epoch) => Ok(ProbeReport { epoch, degraded: true, train_accuracy: train_acc, val_accuracy: val_acc }),
        None => {
            warn!("validation accuracy did not degrade within {max_epochs} epochs; using {max_epochs}");
            Ok(ProbeReport { epoch: max_epochs, degraded: false, train_accuracy: train_acc, val_accuracy: val_acc })
        }
    }
}
