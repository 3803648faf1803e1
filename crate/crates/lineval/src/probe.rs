use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use pnda_nn::LrSchedule;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{LinearProbeConfig, LinevalError, Result};

/// Per-class shuffled split; each class with at least two members lands in
/// both parts. Both index lists are sorted.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut members in by_class.into_values() {
        members.shuffle(&mut rng);
        let n = members.len();
        let k = if n < 2 { n } else { ((train_fraction * n as f64).round() as usize).clamp(1, n - 1) };
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    match x.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        Some(row) => Err(LinevalError::NonFinite(row)),
        None => Ok(()),
    }
}

fn distinct(labels: &[usize]) -> usize {
    labels.iter().collect::<BTreeSet<_>>().len()
}

/// Row-wise softmax in place.
fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Affine softmax classifier, optionally preceded by a fixed z-scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    /// `[dim, classes]`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub mean: Option<Array1<f64>>,
    pub scale: Option<Array1<f64>>,
}

impl LinearClassifier {
    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match (&self.mean, &self.scale) {
            (Some(m), Some(s)) => (&x - m) / s,
            _ => x.to_owned(),
        }
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.transform(x).dot(&self.weight) + &self.bias
    }

    /// Arg-max class per row; ties go to the lower index.
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        self.logits(x)
            .rows()
            .into_iter()
            .map(|r| r.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0)
            .collect()
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let hits = self.predict(x).iter().zip(labels).filter(|(p, l)| p == l).count();
        hits as f64 / labels.len() as f64
    }

    /// Trains from zero weights with momentum SGD on mean cross-entropy.
    /// Returns the classifier and the mean training loss of each epoch.
    pub fn fit(x: ArrayView2<f64>, labels: &[usize], classes: usize, cfg: &LinearProbeConfig) -> Result<(Self, Vec<f64>)> {
        cfg.validate()?;
        if x.nrows() != labels.len() {
            return Err(LinevalError::LengthMismatch { features: x.nrows(), labels: labels.len() });
        }
        if x.nrows() == 0 {
            return Err(LinevalError::EmptySplit("training"));
        }
        check_finite(x)?;
        let dim = x.ncols();
        let (mean, scale) = if cfg.standardize {
            let mean = x.mean_axis(Axis(0)).expect("non-empty");
            let std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
            (Some(mean), Some(std))
        } else {
            (None, None)
        };
        let mut model = Self { weight: Array2::zeros((dim, classes)), bias: Array1::zeros(classes), mean, scale };
        let xs = model.transform(x);
        let schedule = LrSchedule::Milestones { fractions: cfg.milestones.clone(), gamma: cfg.gamma };
        let mut vel_w = Array2::<f64>::zeros((dim, classes));
        let mut vel_b = Array1::<f64>::zeros(classes);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let batch = if cfg.shuffle { cfg.batch_size } else { labels.len() };
        let mut losses = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let lr = cfg.lr * schedule.factor(epoch as f64, cfg.epochs as f64);
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            let mut total = 0.0;
            for chunk in order.chunks(batch) {
                let xb = xs.select(Axis(0), chunk);
                let mut p = xb.dot(&model.weight) + &model.bias;
                softmax_rows(&mut p);
                for (mut row, &i) in p.rows_mut().into_iter().zip(chunk) {
                    total -= row[labels[i]].max(f64::MIN_POSITIVE).ln();
                    row[labels[i]] -= 1.0;
                }
                p /= chunk.len() as f64;
                let gw = xb.t().dot(&p) + cfg.weight_decay * &model.weight;
                let gb = p.sum_axis(Axis(0));
                vel_w = cfg.momentum * &vel_w + gw;
                vel_b = cfg.momentum * &vel_b + gb;
                model.weight.scaled_add(-lr, &vel_w);
                model.bias.scaled_add(-lr, &vel_b);
            }
            let mean_loss = total / labels.len() as f64;
            if !mean_loss.is_finite() || model.weight.iter().any(|w| !w.is_finite()) {
                return Err(LinevalError::Diverged { epoch: epoch + 1 });
            }
            losses.push(mean_loss);
        }
        Ok((model, losses))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Held-out top-1 accuracy.
    pub top1: f64,
    pub train_top1: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub num_classes: usize,
    pub epoch_losses: Vec<f64>,
}

/// Probe on explicit train and test sets.
pub fn linear_probe_split(
    train_x: ArrayView2<f64>,
    train_y: &[usize],
    test_x: ArrayView2<f64>,
    test_y: &[usize],
    cfg: &LinearProbeConfig,
) -> Result<ProbeResult> {
    if test_x.nrows() != test_y.len() {
        return Err(LinevalError::LengthMismatch { features: test_x.nrows(), labels: test_y.len() });
    }
    if test_y.is_empty() {
        return Err(LinevalError::EmptySplit("test"));
    }
    if test_x.ncols() != train_x.ncols() {
        return Err(LinevalError::Config(format!("feature widths differ: {} vs {}", train_x.ncols(), test_x.ncols())));
    }
    check_finite(test_x)?;
    let seen = distinct(train_y);
    if seen < 2 {
        return Err(LinevalError::SingleClass(seen));
    }
    let classes = train_y.iter().chain(test_y).max().map_or(0, |m| m + 1);
    let (model, epoch_losses) = LinearClassifier::fit(train_x, train_y, classes, cfg)?;
    Ok(ProbeResult {
        top1: model.accuracy(test_x, test_y),
        train_top1: model.accuracy(train_x, train_y),
        n_train: train_y.len(),
        n_test: test_y.len(),
        num_classes: classes,
        epoch_losses,
    })
}

/// Probe with a stratified split of one labelled feature set.
pub fn linear_probe(features: ArrayView2<f64>, labels: &[usize], cfg: &LinearProbeConfig) -> Result<ProbeResult> {
    cfg.validate()?;
    if features.nrows() != labels.len() {
        return Err(LinevalError::LengthMismatch { features: features.nrows(), labels: labels.len() });
    }
    let classes = distinct(labels);
    if classes < 2 {
        return Err(LinevalError::SingleClass(classes));
    }
    let (train, test) = stratified_split(labels, cfg.train_fraction, cfg.seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    linear_probe_split(
        features.select(Axis(0), &train).view(),
        &pick(&train),
        features.select(Axis(0), &test).view(),
        &pick(&test),
        cfg,
    )
}
