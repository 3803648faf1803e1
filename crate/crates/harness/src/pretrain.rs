use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use pnda_core::{rotate, ImageSample, Rotation, Verdict};
use pnda_losses::{
    batch_pnda_info_nce, l2_normalize_backward, l2_normalize_rows, pnda_byol_loss_grad, AugMode, EmbeddingBatch,
};
use pnda_nn::{Encoder, Matrix, Mlp, Module, Optimizer};
use pnda_sampler::RaiPartition;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::plan::{build_plan, verdict_table, BatchStream, AUGMENT_STREAM};
use crate::{
    augment, momentum_update, BatchPlan, Branch, ExperimentConfig, Framework, HarnessError, KeyQueue, OnlineNet, Result,
};

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    pub mode: AugMode,
    pub framework: Framework,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub online: OnlineNet,
    /// Mean step loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: Vec<StepRecord>,
    /// Plans of the first `spec_dump_steps` steps.
    pub spec_dump: Vec<BatchPlan>,
}

impl PretrainOutcome {
    pub fn encoder(&self) -> &Encoder {
        self.online.encoder()
    }
}

pub fn write_metrics_jsonl(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Augmented inputs for one step.
///
/// SimCLR: `[X | X+ | Rot(X, t1) | Rot(X+, t2)]`. MoCo and BYOL:
/// `[X | X+ | X+@90 | X+@180 | X+@270]`, where the first block goes through
/// the online network and the rest through the target. Rotated blocks are
/// present only when the mode uses rotations.
#[derive(Debug, Clone)]
pub struct PreparedBatch {
    pub plan: BatchPlan,
    pub views: Vec<ImageSample>,
}

fn all_finite(m: &Matrix) -> bool {
    m.data.iter().all(|v| v.is_finite())
}

fn normalized(raw: &Matrix) -> (Vec<f64>, Vec<f64>) {
    l2_normalize_rows(&raw.to_f64(), raw.cols)
}

/// Step-by-step driver; [`Pretrainer::run`] is the full loop.
pub struct Pretrainer<'a> {
    cfg: ExperimentConfig,
    corpus: &'a [ImageSample],
    verdicts: Option<HashMap<String, Verdict>>,
    online: OnlineNet,
    target: Option<Branch>,
    queue: Option<KeyQueue>,
    optimizer: Optimizer,
    stream: BatchStream,
    aug_rng: ChaCha8Rng,
    tau: f64,
}

impl<'a> Pretrainer<'a> {
    /// Builds networks from `cfg.seed` and, for MoCo, fills the queue with
    /// target keys of augmented corpus images.
    pub fn new(cfg: &ExperimentConfig, corpus: &'a [ImageSample], partition: Option<&RaiPartition>) -> Result<Self> {
        cfg.validate()?;
        let verdicts = verdict_table(cfg, corpus, partition)?;
        let stream = BatchStream::new(corpus.len(), cfg.batch_size, cfg.seed)?;
        let mut init = ChaCha8Rng::seed_from_u64(cfg.seed);
        let branch = Branch::new(&cfg.encoder, corpus[0].channels(), &cfg.projection, &mut init)?;
        let predictor = (cfg.framework == Framework::Byol).then(|| {
            let mut dims = vec![cfg.embedding_dim()];
            dims.extend_from_slice(&cfg.predictor);
            Mlp::new("pred", &dims, &mut init)
        });
        let target = cfg.framework.uses_target_network().then(|| branch.clone());
        let mut me = Self {
            cfg: cfg.clone(),
            corpus,
            verdicts,
            online: OnlineNet { branch, predictor },
            target,
            queue: None,
            optimizer: Optimizer::new(cfg.optimizer())?,
            stream,
            aug_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ AUGMENT_STREAM),
            tau: cfg.tau().unwrap_or(1.0),
        };
        if cfg.framework == Framework::MocoV2 {
            me.fill_queue()?;
        }
        Ok(me)
    }

    fn fill_queue(&mut self) -> Result<()> {
        let mut queue = KeyQueue::new(self.cfg.queue_size, self.cfg.embedding_dim())?;
        let target = self.target.as_ref().expect("moco has a target");
        let mut order: Vec<usize> = (0..self.corpus.len()).collect();
        while !queue.is_full() {
            order.shuffle(&mut self.aug_rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let need = queue.capacity() - queue.len();
                if need == 0 {
                    break;
                }
                let views = chunk[..chunk.len().min(need)]
                    .iter()
                    .map(|&i| augment(&self.corpus[i], &self.cfg.augment, &mut self.aug_rng))
                    .collect::<Result<Vec<_>>>()?;
                let (keys, _) = normalized(&target.embed(&views)?);
                queue.enqueue(keys.chunks(queue.dim()))?;
            }
        }
        self.queue = Some(queue);
        Ok(())
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn online(&self) -> &OnlineNet {
        &self.online
    }

    pub fn target(&self) -> Option<&Branch> {
        self.target.as_ref()
    }

    pub fn queue(&self) -> Option<&KeyQueue> {
        self.queue.as_ref()
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.stream.steps_per_epoch()
    }

    /// Draws the next epoch's batches and builds their plans.
    pub fn next_epoch(&mut self, epoch: usize) -> Result<Vec<BatchPlan>> {
        let queue_len = self.queue.as_ref().map_or(self.cfg.queue_size, KeyQueue::len);
        self.stream
            .next_epoch()
            .into_iter()
            .enumerate()
            .map(|(step, (images, thetas))| {
                build_plan(&self.cfg, self.corpus, self.verdicts.as_ref(), queue_len, epoch, step, images, thetas)
            })
            .collect()
    }

    /// Two augmented views per image, then the rotated blocks.
    pub fn prepare(&mut self, plan: BatchPlan) -> Result<PreparedBatch> {
        let mut a = Vec::with_capacity(plan.images.len());
        let mut b = Vec::with_capacity(plan.images.len());
        for &i in &plan.images {
            a.push(augment(&self.corpus[i], &self.cfg.augment, &mut self.aug_rng)?);
            b.push(augment(&self.corpus[i], &self.cfg.augment, &mut self.aug_rng)?);
        }
        let mut views = a.clone();
        views.extend(b.iter().cloned());
        if self.cfg.mode.uses_rotations() {
            match (self.cfg.framework, plan.rotations) {
                (Framework::Simclr, Some((t1, t2))) => {
                    views.extend(a.iter().map(|v| rotate(v, t1)));
                    views.extend(b.iter().map(|v| rotate(v, t2)));
                }
                (Framework::Simclr, None) => unreachable!("rotating simclr plans carry angles"),
                _ => {
                    for r in Rotation::NON_IDENTITY {
                        views.extend(b.iter().map(|v| rotate(v, r)));
                    }
                }
            }
        }
        Ok(PreparedBatch { plan, views })
    }

    /// One optimisation step at learning rate `lr`; returns the loss before the update.
    pub fn step(&mut self, batch: &PreparedBatch, lr: f64) -> Result<f64> {
        self.online.zero_grad();
        let loss = match self.cfg.framework {
            Framework::Simclr => self.simclr_grad(batch)?,
            Framework::MocoV2 => self.moco_grad(batch)?,
            Framework::Byol => self.byol_grad(batch)?,
        };
        if !loss.is_finite() {
            return Ok(loss);
        }
        self.optimizer.step(self.online.params_mut(), lr)?;
        if let Some(target) = &mut self.target {
            momentum_update(&self.online.branch, target, self.cfg.ema_momentum)?;
        }
        Ok(loss)
    }

    fn backprop_rows(&mut self, cache: &crate::network::OnlineCache, normed: &[f64], norms: &[f64], grad: &[f64], dim: usize) -> Result<()> {
        let draw = l2_normalize_backward(normed, norms, grad, dim);
        let dz = Matrix::from_f64(norms.len(), dim, &draw)?;
        self.online.backward(cache, &dz)
    }

    fn simclr_grad(&mut self, batch: &PreparedBatch) -> Result<f64> {
        let (raw, cache) = self.online.forward_train(&batch.views)?;
        if !all_finite(&raw) {
            return Ok(f64::NAN);
        }
        let dim = raw.cols;
        let (normed, norms) = normalized(&raw);
        let pool = EmbeddingBatch::new(dim, normed.clone())?;
        let (loss, grad) = batch_pnda_info_nce(&pool, &batch.plan.specs, self.tau)?;
        if loss.is_finite() {
            self.backprop_rows(&cache, &normed, &norms, &grad, dim)?;
        }
        Ok(loss)
    }

    fn moco_grad(&mut self, batch: &PreparedBatch) -> Result<f64> {
        let m = batch.plan.images.len();
        let (raw_q, cache) = self.online.forward_train(&batch.views[..m])?;
        let dim = raw_q.cols;
        let (q, q_norms) = normalized(&raw_q);
        let target = self.target.as_ref().expect("moco has a target");
        let raw_k = target.embed(&batch.views[m..])?;
        if !all_finite(&raw_q) || !all_finite(&raw_k) {
            return Ok(f64::NAN);
        }
        let (keys, _) = normalized(&raw_k);
        let queue = self.queue.as_mut().expect("moco has a queue");
        let mut data = q.clone();
        data.extend_from_slice(&keys);
        for row in queue.iter() {
            data.extend_from_slice(row);
        }
        let pool = EmbeddingBatch::new(dim, data)?;
        let (loss, grad) = batch_pnda_info_nce(&pool, &batch.plan.specs, self.tau)?;
        // Only unrotated keys enter the queue.
        queue.enqueue(keys[..m * dim].chunks(dim))?;
        if loss.is_finite() {
            self.backprop_rows(&cache, &q, &q_norms, &grad[..m * dim], dim)?;
        }
        Ok(loss)
    }

    fn byol_grad(&mut self, batch: &PreparedBatch) -> Result<f64> {
        let m = batch.plan.images.len();
        let (raw, cache) = self.online.forward_train(&batch.views[..m])?;
        let dim = raw.cols;
        let target = self.target.as_ref().expect("byol has a target");
        let raw_t = target.embed(&batch.views[m..])?;
        if !all_finite(&raw) || !all_finite(&raw_t) {
            return Ok(f64::NAN);
        }
        let (z, norms) = normalized(&raw);
        let (t, _) = normalized(&raw_t);
        let row = |k: usize| &t[k * dim..(k + 1) * dim];
        let mut grad = vec![0.0; m * dim];
        let mut total = 0.0;
        let rotated = self.cfg.mode.uses_rotations();
        for i in 0..m {
            let rot: Vec<&[f64]> = if rotated { (1..=3).map(|r| row(r * m + i)).collect() } else { Vec::new() };
            let (pos, neg): (&[&[f64]], &[&[f64]]) = match batch.plan.treatments[i] {
                Some(Verdict::Rai) => (&rot, &[]),
                Some(Verdict::NonRai) => (&[], &rot),
                None => (&[], &[]),
            };
            let g = pnda_byol_loss_grad(&z[i * dim..(i + 1) * dim], row(i), pos, neg, self.cfg.alpha)?;
            total += g.loss;
            for (d, v) in grad[i * dim..(i + 1) * dim].iter_mut().zip(&g.anchor) {
                *d = v / m as f64;
            }
        }
        let loss = total / m as f64;
        if loss.is_finite() {
            self.backprop_rows(&cache, &z, &norms, &grad, dim)?;
        }
        Ok(loss)
    }

    /// Trains for `cfg.epochs` epochs.
    pub fn run(mut self) -> Result<PretrainOutcome> {
        let epochs = self.cfg.epochs;
        let steps = self.steps_per_epoch();
        let base = self.cfg.optimizer().lr();
        let schedule = self.cfg.schedule();
        let mut records = Vec::new();
        let mut epoch_losses = Vec::new();
        let mut spec_dump = Vec::new();
        let mut last_good: Option<Box<Encoder>> = None;
        for epoch in 1..=epochs {
            let mut total = 0.0;
            for plan in self.next_epoch(epoch)? {
                let step = plan.step;
                if spec_dump.len() < self.cfg.spec_dump_steps {
                    spec_dump.push(plan.clone());
                }
                let batch = self.prepare(plan)?;
                let lr = base * schedule.factor((epoch - 1) as f64 + step as f64 / steps as f64, epochs as f64);
                let loss = self.step(&batch, lr)?;
                if !loss.is_finite() {
                    return Err(HarnessError::Diverged { epoch, step, loss, last_good });
                }
                total += loss;
                records.push(StepRecord { epoch, step, loss, lr, mode: self.cfg.mode, framework: self.cfg.framework });
            }
            let mean = total / steps as f64;
            info!("{} {} epoch {epoch}/{epochs}: loss {mean:.6}", self.cfg.framework, self.cfg.mode);
            epoch_losses.push(mean);
            last_good = Some(Box::new(self.online.encoder().clone()));
        }
        Ok(PretrainOutcome { online: self.online, epoch_losses, steps: records, spec_dump })
    }
}

/// Full pretraining run.
pub fn pretrain(cfg: &ExperimentConfig, corpus: &[ImageSample], partition: Option<&RaiPartition>) -> Result<PretrainOutcome> {
    Pretrainer::new(cfg, corpus, partition)?.run()
}
