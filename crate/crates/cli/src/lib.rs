//! The `pnda` command line: RAI sampling, pretraining, linear evaluation,
//! ratio sweeps and summary tables, all driven by one TOML configuration.

pub mod cli;
mod commands;
mod config;
mod corpus;
mod error;
mod manifest;

pub use commands::*;
pub use config::{apply_override, CorpusConfig, CorpusKind, RunConfig, SweepConfig};
pub use corpus::{load_corpus, load_directory, DATA_DIR_ENV};
pub use error::{CliError, Result};
pub use manifest::{Outputs, RunManifest, MANIFEST_FILE};
