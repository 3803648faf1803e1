use std::collections::HashMap;

use pnda_core::{ImageSample, Rotation, Verdict};
use pnda_losses::{build_sets_moco, build_sets_simclr, draw_rotation_pair, MocoLayout, PairSpec, SimclrLayout};
use pnda_sampler::RaiPartition;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ExperimentConfig, Framework, HarnessError, Result};

pub(crate) const ORDER_STREAM: u64 = 0x4f52_4445_5200_0000;
pub(crate) const THETA_STREAM: u64 = 0x5448_4554_4100_0000;
pub(crate) const AUGMENT_STREAM: u64 = 0x4155_474d_0000_0000;

/// Which images one step uses and how every anchor treats rotated views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub epoch: usize,
    pub step: usize,
    /// Corpus indices of the `M` source images.
    pub images: Vec<usize>,
    /// SimCLR angle pair, when the pool carries rotated views.
    pub rotations: Option<(Rotation, Rotation)>,
    /// Per source image: `None` vanilla, else the verdict applied.
    pub treatments: Vec<Option<Verdict>>,
    /// Anchor specs over the step's pool; empty for BYOL.
    pub specs: Vec<PairSpec>,
}

/// Verdicts keyed by image id, present only under PNDA.
pub(crate) fn verdict_table(
    cfg: &ExperimentConfig,
    corpus: &[ImageSample],
    partition: Option<&RaiPartition>,
) -> Result<Option<HashMap<String, Verdict>>> {
    if !cfg.mode.needs_partition() {
        return Ok(None);
    }
    let p = partition.ok_or_else(|| HarnessError::Config("mode pnda requires a partition".into()))?;
    let missing = p.missing(corpus);
    if let Some(first) = missing.first() {
        return Err(HarnessError::PartitionCoverage { count: missing.len(), example: first.to_string() });
    }
    Ok(Some(corpus.iter().map(|i| (i.id().to_string(), p.verdict(i.id()).expect("covered"))).collect()))
}

/// Epoch shuffles and per-step angle draws. Both use their own streams so
/// every mode sees the same batches and angles.
#[derive(Debug, Clone)]
pub(crate) struct BatchStream {
    order_rng: ChaCha8Rng,
    theta_rng: ChaCha8Rng,
    order: Vec<usize>,
    batch: usize,
}

impl BatchStream {
    pub(crate) fn new(len: usize, batch: usize, seed: u64) -> Result<Self> {
        if len < batch {
            return Err(HarnessError::CorpusTooSmall { len, batch });
        }
        Ok(Self {
            order_rng: ChaCha8Rng::seed_from_u64(seed ^ ORDER_STREAM),
            theta_rng: ChaCha8Rng::seed_from_u64(seed ^ THETA_STREAM),
            order: (0..len).collect(),
            batch,
        })
    }

    pub(crate) fn steps_per_epoch(&self) -> usize {
        self.order.len() / self.batch
    }

    /// Full batches of one epoch; the remainder is dropped.
    pub(crate) fn next_epoch(&mut self) -> Vec<(Vec<usize>, (Rotation, Rotation))> {
        self.order.shuffle(&mut self.order_rng);
        self.order
            .chunks_exact(self.batch)
            .map(|c| (c.to_vec(), draw_rotation_pair(&mut self.theta_rng)))
            .collect()
    }
}

pub(crate) fn build_plan(
    cfg: &ExperimentConfig,
    corpus: &[ImageSample],
    verdicts: Option<&HashMap<String, Verdict>>,
    queue_len: usize,
    epoch: usize,
    step: usize,
    images: Vec<usize>,
    thetas: (Rotation, Rotation),
) -> Result<BatchPlan> {
    let treatments = images
        .iter()
        .map(|&i| cfg.mode.treatment(|| verdicts.and_then(|v| v.get(corpus[i].id()).copied())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let m = images.len();
    let rotated = cfg.mode.uses_rotations();
    let (rotations, specs) = match cfg.framework {
        Framework::Simclr => {
            let layout = SimclrLayout::new(m, rotated.then_some(thetas))?;
            let specs = (0..layout.anchor_count())
                .map(|a| build_sets_simclr(&layout, a, treatments[a % m]))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            (layout.rotations(), specs)
        }
        Framework::MocoV2 => {
            let layout = MocoLayout { batch: m, queue: queue_len, rotated_keys: rotated };
            let specs = (0..m)
                .map(|a| build_sets_moco(&layout, a, treatments[a]))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            (None, specs)
        }
        Framework::Byol => (None, Vec::new()),
    };
    Ok(BatchPlan { epoch, step, images, rotations, treatments, specs })
}

/// The batch plans a run with `cfg` would execute over `epochs` epochs, without
/// building any network. MoCo plans assume a full queue.
pub fn plan_batches(
    cfg: &ExperimentConfig,
    corpus: &[ImageSample],
    partition: Option<&RaiPartition>,
    epochs: usize,
) -> Result<Vec<BatchPlan>> {
    cfg.validate()?;
    let verdicts = verdict_table(cfg, corpus, partition)?;
    let mut stream = BatchStream::new(corpus.len(), cfg.batch_size, cfg.seed)?;
    let mut out = Vec::new();
    for epoch in 1..=epochs {
        for (step, (images, thetas)) in stream.next_epoch().into_iter().enumerate() {
            out.push(build_plan(cfg, corpus, verdicts.as_ref(), cfg.queue_size, epoch, step, images, thetas)?);
        }
    }
    Ok(out)
}
