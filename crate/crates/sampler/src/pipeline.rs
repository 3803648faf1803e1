use log::{info, warn};
use pnda_core::ImageSample;

use crate::score::Evaluation;
use crate::train::{init_predictor, overfit_probe, train_step1, train_step2};
use crate::{
    partition, tune_check, Beta1, ProbeReport, RaiPartition, Result, RotationPredictor, SamplerConfig, TrainReport,
};

/// Everything produced by one end-to-end sampler run.
#[derive(Debug, Clone)]
pub struct SamplerRun {
    pub probe: Option<ProbeReport>,
    pub beta1: usize,
    pub step1: TrainReport,
    pub step2: TrainReport,
    pub step1_model: RotationPredictor,
    pub model: RotationPredictor,
    pub partition: RaiPartition,
    pub tune_ok: bool,
}

impl SamplerRun {
    pub fn step1_eval(&self) -> &Evaluation {
        &self.step1.evaluation
    }

    pub fn step2_eval(&self) -> &Evaluation {
        &self.step2.evaluation
    }
}

/// Probe (when `beta1` is auto), Step 1, Step 2, scoring and partitioning.
/// A failed tuning check is reported in `tune_ok`, not as an error.
pub fn run_sampler(corpus: &[ImageSample], cfg: &SamplerConfig) -> Result<SamplerRun> {
    cfg.validate()?;
    let (probe, beta1) = match cfg.beta1 {
        Beta1::Fixed(n) => (None, n),
        Beta1::Auto => {
            let report = overfit_probe(corpus, cfg, cfg.probe_max_epochs)?;
            let e = report.epoch;
            info!("overfit probe chose beta1 = {e}");
            (Some(report), e)
        }
    };
    let mut model = init_predictor(corpus, cfg)?;
    let step1 = train_step1(&mut model, corpus, cfg, beta1)?;
    let step1_model = model.clone();
    let step2 = train_step2(&mut model, corpus, cfg)?;
    let mut partition = partition(&step2.evaluation.id_scores(corpus), cfg.rho, cfg.margin)?;
    partition.meta.step1_accuracy = Some(step1.accuracy());
    partition.meta.step2_accuracy = Some(step2.accuracy());
    partition.meta.config = Some(serde_json::to_value(cfg)?);
    let tune_ok = tune_check(step1.accuracy(), step2.accuracy(), cfg.tune_tolerance);
    if !tune_ok {
        warn!(
            "rotation accuracy moved from {:.4} to {:.4} (tolerance {}); adjust lambda_prime or margin",
            step1.accuracy(),
            step2.accuracy(),
            cfg.tune_tolerance
        );
    }
    Ok(SamplerRun { probe, beta1, step1, step2, step1_model, model, partition, tune_ok })
}
