use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use log::info;
use pnda_core::ImageSample;
use pnda_lineval::{read_results, ResultsRecord};
use pnda_losses::AugMode;
use pnda_sampler::RaiPartition;
use serde::{Deserialize, Serialize};

use super::{run_lineval, run_pretrain, Context, EncoderMeta};
use crate::{load_corpus, CliError, Outputs, Result, RunConfig, RunManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub rai_count: usize,
    pub top1: f64,
}

fn load_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    let p = RaiPartition::load(path).map_err(|e| CliError::Config(format!("cannot load scores {}: {e}", path.display())))?;
    Ok(p.records.iter().map(|r| (r.id.clone(), r.score)).collect())
}

fn check_ratios(ratios: &[f64]) -> Result<()> {
    if ratios.is_empty() {
        return Err(CliError::Config("no ratios requested".into()));
    }
    match ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        Some(r) => Err(CliError::Config(format!("ratio {r} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn cell_dir(root: &Path, index: usize, ratio: f64) -> PathBuf {
    root.join(format!("cell-{index:02}-r{ratio:.4}"))
}

/// One sweep cell: the top `ratio` share by score is RAI, then PNDA
/// pretraining and linear evaluation.
pub fn run_sweep_cell(
    cfg: &RunConfig,
    corpus: &[ImageSample],
    scores: &[(String, f64)],
    ratio: f64,
    out: &mut Outputs,
) -> Result<(ResultsRecord, usize)> {
    let partition = RaiPartition::from_ratio(scores, ratio)?;
    let csv = out.path("partition.csv");
    partition.save(&csv)?;
    out.path("partition.meta.json");
    let mut pre = cfg.pretrain.clone();
    pre.mode = AugMode::Pnda;
    pre.partition = Some(csv);
    pre.validate()?;
    let outcome = run_pretrain(&pre, corpus, Some(&partition), Some(ratio), out)?;
    let meta = EncoderMeta { encoder: pre.encoder.clone(), in_channels: corpus[0].channels(), experiment: pre, ratio: Some(ratio) };
    let record = run_lineval(outcome.encoder(), &meta, corpus, &cfg.lineval, out)?;
    Ok((record, partition.rai_count()))
}

pub fn cmd_sweep_cell(cfg: &RunConfig, ctx: &Context, scores: &Path, ratio: f64) -> Result<RunManifest> {
    check_ratios(&[ratio])?;
    let corpus = load_corpus(&cfg.corpus)?;
    let scores = load_scores(scores)?;
    let mut out = Outputs::create(&ctx.out)?;
    let (_, rai) = run_sweep_cell(cfg, &corpus, &scores, ratio, &mut out)?;
    out.write_json("cell.json", &serde_json::json!({ "ratio": ratio, "rai_count": rai }))?;
    out.finish("sweep-cell", ctx.config_path.as_deref(), ctx.seed, "ok")
}

fn spawn_cells(cfg_path: &Path, scores: &Path, cells: &[(usize, f64, PathBuf)], jobs: usize) -> Result<()> {
    let exe = std::env::current_exe()?;
    for group in cells.chunks(jobs.max(1)) {
        let mut children = Vec::new();
        for (_, ratio, dir) in group {
            let child = Command::new(&exe)
                .arg("sweep-cell")
                .arg("--config")
                .arg(cfg_path)
                .arg("--scores")
                .arg(scores)
                .arg("--ratio")
                .arg(ratio.to_string())
                .arg("--out")
                .arg(dir)
                .spawn()?;
            children.push((*ratio, child));
        }
        for (ratio, mut child) in children {
            let status = child.wait()?;
            if !status.success() {
                let msg = format!("sweep cell r={ratio} exited with {status}");
                return Err(match status.code() {
                    Some(2) => CliError::Config(msg),
                    Some(3) => CliError::Numeric(msg),
                    _ => CliError::Runtime(msg),
                });
            }
        }
    }
    Ok(())
}

/// Runs one cell per ratio, in-process or as `jobs` parallel child
/// processes, and tabulates top-1 accuracy against the ratio.
pub fn cmd_ratio_sweep(cfg: &RunConfig, ctx: &Context, scores_path: &Path, ratios: &[f64]) -> Result<(Vec<SweepRow>, RunManifest)> {
    check_ratios(ratios)?;
    let scores = load_scores(scores_path)?;
    let mut out = Outputs::create(&ctx.out)?;
    let cfg_path = out.write("config.toml", cfg.to_toml()?)?;
    let cells: Vec<(usize, f64, PathBuf)> =
        ratios.iter().enumerate().map(|(i, &r)| (i, r, cell_dir(&ctx.out, i, r))).collect();
    let mut rows = Vec::new();
    if ctx.jobs > 1 {
        spawn_cells(&cfg_path, scores_path, &cells, ctx.jobs)?;
        for (_, ratio, dir) in &cells {
            let record = read_results(&dir.join("results.jsonl"))?.pop().ok_or_else(|| {
                CliError::Runtime(format!("cell {} wrote no result", dir.display()))
            })?;
            let cell: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("cell.json"))?)?;
            let rai_count = cell["rai_count"].as_u64().unwrap_or_default() as usize;
            rows.push(SweepRow { ratio: *ratio, rai_count, top1: record.top1 });
        }
    } else {
        let corpus = load_corpus(&cfg.corpus)?;
        for (_, ratio, dir) in &cells {
            info!("sweep cell r = {ratio}");
            let mut cell_out = Outputs::create(dir)?;
            let (record, rai_count) = run_sweep_cell(cfg, &corpus, &scores, *ratio, &mut cell_out)?;
            cell_out.write_json("cell.json", &serde_json::json!({ "ratio": ratio, "rai_count": rai_count }))?;
            cell_out.finish("sweep-cell", Some(&cfg_path), ctx.seed, "ok")?;
            rows.push(SweepRow { ratio: *ratio, rai_count, top1: record.top1 });
        }
    }
    for (_, _, dir) in &cells {
        let name = dir.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        out.path(&name);
    }
    let mut csv = String::from("ratio,rai_count,top1\n");
    for r in &rows {
        writeln!(csv, "{},{},{:.6}", r.ratio, r.rai_count, r.top1).expect("string write");
    }
    out.write("sweep.csv", csv)?;
    let manifest = out.finish("ratio-sweep", ctx.config_path.as_deref(), ctx.seed, "ok")?;
    Ok((rows, manifest))
}
