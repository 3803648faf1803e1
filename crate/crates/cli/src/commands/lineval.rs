use std::path::Path;

use log::info;
use pnda_core::ImageSample;
use pnda_lineval::{
    append_result, config_hash, corpus_labels, extract_features, linear_probe, LinearProbeConfig, ResultsRecord,
};
use pnda_nn::{load_checkpoint, Encoder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{Context, EncoderMeta};
use crate::{load_corpus, CliError, Outputs, Result, RunConfig, RunManifest};

const FEATURE_BATCH: usize = 128;

pub fn load_encoder(path: &Path) -> Result<(Encoder, EncoderMeta)> {
    let ckpt = load_checkpoint(path).map_err(|e| CliError::Config(format!("cannot load {}: {e}", path.display())))?;
    let meta: EncoderMeta = ckpt.config()?;
    let mut encoder = Encoder::new(&meta.encoder, meta.in_channels, &mut ChaCha8Rng::seed_from_u64(0))?;
    ckpt.apply(&mut encoder)?;
    Ok((encoder, meta))
}

/// Probes frozen features and writes `lineval.json` and `results.jsonl`.
pub fn run_lineval(
    encoder: &Encoder,
    meta: &EncoderMeta,
    corpus: &[ImageSample],
    probe: &LinearProbeConfig,
    out: &mut Outputs,
) -> Result<ResultsRecord> {
    let labels = corpus_labels(corpus)?;
    let features = extract_features(encoder, corpus, FEATURE_BATCH)?;
    let result = linear_probe(features.view(), &labels, probe)?;
    info!("top-1 {:.4} on {} held-out images", result.top1, result.n_test);
    let record = ResultsRecord {
        framework: meta.experiment.framework.to_string(),
        mode: meta.experiment.mode.to_string(),
        encoder: meta.encoder.tag(),
        top1: result.top1,
        seed: meta.experiment.seed,
        config_hash: config_hash(&json!({ "pretrain": meta.experiment, "lineval": probe, "ratio": meta.ratio }))?,
        ratio: meta.ratio,
    };
    out.write_json("lineval.json", &result)?;
    out.write("results.jsonl", serde_json::to_string(&record)? + "\n")?;
    Ok(record)
}

pub fn cmd_lineval(cfg: &RunConfig, ctx: &Context, checkpoint: &Path, append_to: Option<&Path>) -> Result<RunManifest> {
    cfg.lineval.validate()?;
    let (encoder, meta) = load_encoder(checkpoint)?;
    let corpus = load_corpus(&cfg.corpus)?;
    let mut out = Outputs::create(&ctx.out)?;
    out.write("config.toml", cfg.to_toml()?)?;
    let record = run_lineval(&encoder, &meta, &corpus, &cfg.lineval, &mut out)?;
    if let Some(table) = append_to {
        append_result(table, &record)?;
    }
    out.finish("lineval", ctx.config_path.as_deref(), ctx.seed, "ok")
}
