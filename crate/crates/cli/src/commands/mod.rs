mod lineval;
mod pretrain;
mod report;
mod sample;
mod sweep;

use std::path::PathBuf;

pub use lineval::{cmd_lineval, load_encoder, run_lineval};
pub use pretrain::{cmd_pretrain, run_pretrain, EncoderMeta};
pub use report::{cmd_report, find_results, render_csv, render_markdown, summarize, SummaryRow};
pub use sample::{cmd_sample_rai, SampleOutcome};
pub use sweep::{cmd_ratio_sweep, cmd_sweep_cell, run_sweep_cell, SweepRow};

/// Flags shared by every run command.
#[derive(Debug, Clone)]
pub struct Context {
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { config_path: None, seed: None, out: out.into(), jobs: 1 }
    }
}
