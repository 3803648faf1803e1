//! Rotation-prediction objectives: plain cross-entropy over rotation-expanded
//! batches, the entropy separation loss and the entropy-gated cross-entropy.
//!
//! Every batch objective sums over all `4B` rotated inputs and divides by the
//! number `B` of source images. Gates are hard branches evaluated on the
//! current prediction; no gradient flows through the condition.

use pnda_core::{entropy, softmax4, ProbVector, Rotation, ENTROPY_CLAMP};

use crate::{Result, SamplerConfig, SamplerError};

/// Gradient of a scalar with respect to the 4 rotation logits.
pub type LogitGrad = [f64; 4];

pub fn cross_entropy(p: &ProbVector, label: Rotation) -> f64 {
    -p.get(label.index()).max(ENTROPY_CLAMP).ln()
}

/// Step-1 loss on probabilities: `(1/B) * sum of -ln p[label]`.
pub fn loss_crs(preds: &[ProbVector], labels: &[Rotation], source_count: usize) -> Result<f64> {
    check_batch(preds.len(), labels.len(), source_count)?;
    Ok(preds.iter().zip(labels).map(|(p, l)| cross_entropy(p, *l)).sum::<f64>() / source_count as f64)
}

/// Entropy separation: `-|H - rho|` outside the margin band, else 0.
pub fn loss_es(p: &ProbVector, rho: f64, margin: f64) -> f64 {
    let d = entropy(p) - rho;
    if d.abs() > margin {
        -d.abs()
    } else {
        0.0
    }
}

/// Cross-entropy restricted to confident predictions, `H - rho < -m`.
pub fn loss_crs_filtered(p: &ProbVector, label: Rotation, rho: f64, margin: f64) -> f64 {
    if entropy(p) - rho < -margin {
        cross_entropy(p, label)
    } else {
        0.0
    }
}

/// Separation weight at a 1-based Step-2 epoch: `lambda' * epoch / beta2`.
pub fn lambda_at(epoch: usize, beta2: usize, lambda_prime: f64) -> Result<f64> {
    if epoch == 0 || epoch > beta2 {
        return Err(SamplerError::EpochOutOfRange { epoch, beta2 });
    }
    Ok(lambda_prime * epoch as f64 / beta2 as f64)
}

fn log_softmax(logits: &[f64; 4]) -> [f64; 4] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.map(|l| l - lse)
}

/// Cross-entropy from logits and its gradient `p - onehot`.
pub fn crs_logit_grad(logits: &[f64; 4], label: Rotation) -> (f64, LogitGrad) {
    let p = softmax4(*logits);
    let loss = -log_softmax(logits)[label.index()];
    let mut g = p;
    g[label.index()] -= 1.0;
    (loss, g)
}

/// Entropy of `softmax(logits)` and its gradient `-p_k (ln p_k + H)`.
pub fn entropy_logit_grad(logits: &[f64; 4]) -> (f64, LogitGrad) {
    let p = softmax4(*logits);
    let h = entropy(&ProbVector::from_logits(*logits));
    let g = p.map(|pk| -pk * (pk.max(ENTROPY_CLAMP).ln() + h));
    (h, g)
}

pub fn es_logit_grad(logits: &[f64; 4], rho: f64, margin: f64) -> (f64, LogitGrad) {
    let (h, dh) = entropy_logit_grad(logits);
    let d = h - rho;
    if d.abs() > margin {
        let s = d.signum();
        (-d.abs(), dh.map(|g| -s * g))
    } else {
        (0.0, [0.0; 4])
    }
}

pub fn filtered_crs_logit_grad(logits: &[f64; 4], label: Rotation, rho: f64, margin: f64) -> (f64, LogitGrad) {
    let h = entropy(&ProbVector::from_logits(*logits));
    if h - rho < -margin {
        crs_logit_grad(logits, label)
    } else {
        (0.0, [0.0; 4])
    }
}

fn check_batch(preds: usize, labels: usize, source_count: usize) -> Result<()> {
    if preds != labels {
        return Err(SamplerError::LengthMismatch { what: "predictions and labels", left: preds, right: labels });
    }
    if source_count == 0 {
        return Err(SamplerError::Config("source image count must be at least 1".into()));
    }
    Ok(())
}

/// Step-1 objective on logits with per-logit gradient.
pub fn step1_objective_grad(
    logits: &[[f64; 4]],
    labels: &[Rotation],
    source_count: usize,
) -> Result<(f64, Vec<LogitGrad>)> {
    check_batch(logits.len(), labels.len(), source_count)?;
    let scale = 1.0 / source_count as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(l, y)| {
            let (v, g) = crs_logit_grad(l, *y);
            total += v;
            g.map(|x| x * scale)
        })
        .collect();
    Ok((total * scale, grads))
}

/// Step-2 objective `(1/B) * sum(filtered CE + lambda * ES)` with per-logit gradient.
pub fn step2_objective_grad(
    logits: &[[f64; 4]],
    labels: &[Rotation],
    source_count: usize,
    epoch: usize,
    cfg: &SamplerConfig,
) -> Result<(f64, Vec<LogitGrad>)> {
    check_batch(logits.len(), labels.len(), source_count)?;
    let lambda = lambda_at(epoch, cfg.beta2, cfg.lambda_prime)?;
    let scale = 1.0 / source_count as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(l, y)| {
            let (c, gc) = filtered_crs_logit_grad(l, *y, cfg.rho, cfg.margin);
            let (e, ge) = es_logit_grad(l, cfg.rho, cfg.margin);
            total += c + lambda * e;
            std::array::from_fn(|k| (gc[k] + lambda * ge[k]) * scale)
        })
        .collect();
    Ok((total * scale, grads))
}

/// Step-2 objective on probabilities.
pub fn step2_objective(
    preds: &[ProbVector],
    labels: &[Rotation],
    source_count: usize,
    epoch: usize,
    cfg: &SamplerConfig,
) -> Result<f64> {
    check_batch(preds.len(), labels.len(), source_count)?;
    let lambda = lambda_at(epoch, cfg.beta2, cfg.lambda_prime)?;
    let sum: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, y)| loss_crs_filtered(p, *y, cfg.rho, cfg.margin) + lambda * loss_es(p, cfg.rho, cfg.margin))
        .sum();
    Ok(sum / source_count as f64)
}
