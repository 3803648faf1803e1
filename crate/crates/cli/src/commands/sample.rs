use std::fmt::Write as _;

use log::info;
use pnda_nn::save_checkpoint;
use pnda_sampler::{run_sampler, score_gap, SamplerRun, ScoreHistogram, HISTOGRAM_BIN_WIDTH};
use serde_json::json;

use super::Context;
use crate::{load_corpus, CliError, Outputs, Result, RunConfig, RunManifest};

pub struct SampleOutcome {
    pub run: SamplerRun,
    pub manifest: RunManifest,
    /// Ground-truth precision and recall of the RAI verdicts, when known.
    pub precision_recall: Option<(f64, f64)>,
}

impl SampleOutcome {
    /// Maps a failed tuning check to its error.
    pub fn check(&self) -> Result<()> {
        if self.run.tune_ok {
            return Ok(());
        }
        Err(CliError::Tuning(format!(
            "rotation accuracy moved from {:.4} after Step 1 to {:.4} after Step 2; \
             lower lambda_prime or raise margin and rerun",
            self.run.step1.accuracy(),
            self.run.step2.accuracy()
        )))
    }
}

fn histogram_csv(step1: &ScoreHistogram, step2: &ScoreHistogram) -> String {
    let mut s = String::from("bin_lo,bin_hi,step1,step2\n");
    for i in 0..step1.counts.len() {
        let (lo, hi) = step1.edges(i);
        writeln!(s, "{lo:.2},{hi:.6},{},{}", step1.counts[i], step2.counts[i]).expect("string write");
    }
    s
}

/// Probe, Step 1, Step 2, scoring and partitioning; writes the partition,
/// score histograms, a summary and the rotation model.
pub fn cmd_sample_rai(cfg: &RunConfig, ctx: &Context) -> Result<SampleOutcome> {
    cfg.sampler.validate()?;
    let corpus = load_corpus(&cfg.corpus)?;
    info!("sampling {} images", corpus.len());
    let mut out = Outputs::create(&ctx.out)?;
    out.write("config.toml", cfg.to_toml()?)?;
    let run = run_sampler(&corpus, &cfg.sampler)?;

    let csv = out.path("partition.csv");
    run.partition.save(&csv)?;
    out.path("partition.meta.json");

    let (s1, s2) = (&run.step1_eval().scores, &run.step2_eval().scores);
    let h1 = ScoreHistogram::from_scores(s1, HISTOGRAM_BIN_WIDTH);
    let h2 = ScoreHistogram::from_scores(s2, HISTOGRAM_BIN_WIDTH);
    out.write("histogram.csv", histogram_csv(&h1, &h2))?;

    let mut scores = String::from("id,step1,step2\n");
    for ((img, a), b) in corpus.iter().zip(s1).zip(s2) {
        writeln!(scores, "{},{a:.6},{b:.6}", img.id()).expect("string write");
    }
    out.write("scores.csv", scores)?;

    let precision_recall = run.partition.precision_recall(&corpus);
    let summary = json!({
        "images": corpus.len(),
        "beta1": run.beta1,
        "beta2": cfg.sampler.beta2,
        "threshold": cfg.sampler.threshold(),
        "probe": run.probe.as_ref().map(|p| json!({
            "epoch": p.epoch,
            "degraded": p.degraded,
            "train_accuracy": p.train_accuracy,
            "val_accuracy": p.val_accuracy,
        })),
        "step1": {
            "accuracy": run.step1.accuracy(),
            "epoch_losses": run.step1.epoch_losses,
            "score_gap": score_gap(&corpus, s1),
        },
        "step2": {
            "accuracy": run.step2.accuracy(),
            "epoch_losses": run.step2.epoch_losses,
            "score_gap": score_gap(&corpus, s2),
        },
        "tune_ok": run.tune_ok,
        "rai_count": run.partition.rai_count(),
        "precision": precision_recall.map(|p| p.0),
        "recall": precision_recall.map(|p| p.1),
    });
    out.write_json("sampler.json", &summary)?;
    save_checkpoint(&out.path("sampler.ckpt"), &cfg.sampler, &run.model)?;

    let status = if run.tune_ok { "ok" } else { "tune_check_failed" };
    let manifest = out.finish("sample-rai", ctx.config_path.as_deref(), ctx.seed, status)?;
    Ok(SampleOutcome { run, manifest, precision_recall })
}
