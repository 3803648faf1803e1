use std::fmt::Write as _;

use log::info;
use pnda_core::ImageSample;
use pnda_harness::{pretrain, write_metrics_jsonl, ExperimentConfig, HarnessError, PretrainOutcome};
use pnda_nn::{save_checkpoint, EncoderSpec};
use pnda_sampler::RaiPartition;
use serde::{Deserialize, Serialize};

use super::Context;
use crate::{load_corpus, CliError, Outputs, Result, RunConfig, RunManifest};

/// Configuration embedded in encoder checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderMeta {
    pub encoder: EncoderSpec,
    pub in_channels: usize,
    pub experiment: ExperimentConfig,
    /// Rotated-positive ratio of a sweep cell.
    #[serde(default)]
    pub ratio: Option<f64>,
}

/// The partition a mode needs. Only PNDA reads the file.
pub(crate) fn partition_for(cfg: &ExperimentConfig) -> Result<Option<RaiPartition>> {
    if !cfg.mode.needs_partition() {
        return Ok(None);
    }
    let path = cfg.partition.as_ref().ok_or_else(|| CliError::Config("mode pnda requires a partition".into()))?;
    RaiPartition::load(path)
        .map(Some)
        .map_err(|e| CliError::Config(format!("cannot load partition {}: {e}", path.display())))
}

/// Trains and writes `encoder.ckpt`, `metrics.jsonl`, `losses.csv` and,
/// when requested, `specs.jsonl`. On divergence the last completed epoch is
/// saved as `encoder.last_good.ckpt`.
pub fn run_pretrain(
    cfg: &ExperimentConfig,
    corpus: &[ImageSample],
    partition: Option<&RaiPartition>,
    ratio: Option<f64>,
    out: &mut Outputs,
) -> Result<PretrainOutcome> {
    let meta = EncoderMeta { encoder: cfg.encoder.clone(), in_channels: corpus[0].channels(), experiment: cfg.clone(), ratio };
    let outcome = match pretrain(cfg, corpus, partition) {
        Ok(o) => o,
        Err(HarnessError::Diverged { epoch, step, loss, last_good }) => {
            if let Some(enc) = &last_good {
                save_checkpoint(&out.path("encoder.last_good.ckpt"), &meta, enc.as_ref())?;
            }
            return Err(CliError::Numeric(format!("pretraining diverged at epoch {epoch}, step {step}: loss = {loss}")));
        }
        Err(e) => return Err(e.into()),
    };
    save_checkpoint(&out.path("encoder.ckpt"), &meta, outcome.encoder())?;
    write_metrics_jsonl(&out.path("metrics.jsonl"), &outcome.steps)?;
    let mut losses = String::from("epoch,loss\n");
    for (i, l) in outcome.epoch_losses.iter().enumerate() {
        writeln!(losses, "{},{l:.10}", i + 1).expect("string write");
    }
    out.write("losses.csv", losses)?;
    if !outcome.spec_dump.is_empty() {
        let mut text = String::new();
        for plan in &outcome.spec_dump {
            text.push_str(&serde_json::to_string(plan)?);
            text.push('\n');
        }
        out.write("specs.jsonl", text)?;
    }
    Ok(outcome)
}

pub fn cmd_pretrain(cfg: &RunConfig, ctx: &Context) -> Result<RunManifest> {
    cfg.pretrain.validate()?;
    let corpus = load_corpus(&cfg.corpus)?;
    let partition = partition_for(&cfg.pretrain)?;
    info!("pretraining {} {} on {} images", cfg.pretrain.framework, cfg.pretrain.mode, corpus.len());
    let mut out = Outputs::create(&ctx.out)?;
    out.write("config.toml", cfg.to_toml()?)?;
    match run_pretrain(&cfg.pretrain, &corpus, partition.as_ref(), None, &mut out) {
        Ok(_) => out.finish("pretrain", ctx.config_path.as_deref(), ctx.seed, "ok"),
        Err(e @ CliError::Numeric(_)) => {
            out.finish("pretrain", ctx.config_path.as_deref(), ctx.seed, "diverged")?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}
