use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};
use pnda_harness::Framework;
use pnda_losses::AugMode;

use crate::{
    cmd_lineval, cmd_pretrain, cmd_ratio_sweep, cmd_report, cmd_sample_rai, cmd_sweep_cell, Context, Result, RunConfig,
};

#[derive(Debug, Parser)]
#[command(name = "pnda", version, about = "Rotation-aware contrastive pretraining experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every training stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Parallel worker processes for independent sweep cells.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Set a configuration key, e.g. `sampler.beta2=40`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl CommonArgs {
    fn context(&self) -> Context {
        Context { config_path: self.config.clone(), seed: self.seed, out: self.out.clone(), jobs: self.jobs }
    }

    fn load(&self) -> Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), &self.overrides, self.seed)
    }
}

fn mode_parser() -> impl TypedValueParser<Value = AugMode> {
    PossibleValuesParser::new(AugMode::ALL.map(AugMode::as_str)).map(|s| s.parse().expect("listed mode"))
}

fn framework_parser() -> impl TypedValueParser<Value = Framework> {
    PossibleValuesParser::new(["simclr", "moco_v2", "byol"]).map(|s| s.parse().expect("listed framework"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the rotation predictor and split the corpus into RAI and non-RAI images.
    SampleRai {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Contrastive pretraining with a rotation mode.
    Pretrain {
        #[command(flatten)]
        common: CommonArgs,
        /// Partition file from `sample-rai`; read only in pnda mode.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, value_parser = mode_parser())]
        mode: Option<AugMode>,
        #[arg(long, value_parser = framework_parser())]
        framework: Option<Framework>,
    },
    /// Linear evaluation of a pretrained encoder checkpoint.
    Lineval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also append the result to this table.
        #[arg(long)]
        append_to: Option<PathBuf>,
    },
    /// Pretrain and evaluate once per ratio of positive rotated images.
    RatioSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Partition file whose scores rank the images.
        #[arg(long)]
        scores: PathBuf,
        /// Comma-separated ratios in [0, 1]; defaults to `sweep.ratios`.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Summarise every results file below a directory.
    Report {
        results_dir: PathBuf,
        /// Output directory; defaults to `<results_dir>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(hide = true)]
    SweepCell {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        ratio: f64,
    },
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SampleRai { common } => cmd_sample_rai(&common.load()?, &common.context())?.check(),
        Command::Pretrain { common, partition, mode, framework } => {
            let mut cfg = common.load()?;
            if let Some(m) = mode {
                cfg.pretrain.mode = m;
            }
            if let Some(f) = framework {
                cfg.pretrain.framework = f;
            }
            if partition.is_some() {
                cfg.pretrain.partition = partition;
            }
            cmd_pretrain(&cfg, &common.context()).map(drop)
        }
        Command::Lineval { common, checkpoint, append_to } => {
            cmd_lineval(&common.load()?, &common.context(), &checkpoint, append_to.as_deref()).map(drop)
        }
        Command::RatioSweep { common, scores, ratios } => {
            let cfg = common.load()?;
            let ratios = ratios.unwrap_or_else(|| cfg.sweep.ratios.clone());
            cmd_ratio_sweep(&cfg, &common.context(), &scores, &ratios).map(drop)
        }
        Command::Report { results_dir, out } => {
            let out = out.unwrap_or_else(|| results_dir.join("report"));
            cmd_report(&results_dir, &Context::new(out)).map(drop)
        }
        Command::SweepCell { common, scores, ratio } => {
            cmd_sweep_cell(&common.load()?, &common.context(), &scores, ratio).map(drop)
        }
    }
}
