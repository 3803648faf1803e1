use pnda_harness::HarnessError;
use pnda_lineval::LinevalError;
use pnda_nn::NnError;
use pnda_sampler::SamplerError;
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("tuning criterion failed: {0}")]
    Tuning(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Tuning(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<pnda_core::CoreError> for CliError {
    fn from(e: pnda_core::CoreError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        let msg = e.to_string();
        match e {
            SamplerError::Diverged { .. } | SamplerError::NonFiniteScore { .. } => CliError::Numeric(msg),
            SamplerError::Io(_) | SamplerError::Json(_) | SamplerError::Nn(_) => CliError::Runtime(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let msg = e.to_string();
        match e {
            HarnessError::Diverged { .. } => CliError::Numeric(msg),
            HarnessError::Sampler(s) => s.into(),
            HarnessError::Config(_)
            | HarnessError::PartitionCoverage { .. }
            | HarnessError::CorpusTooSmall { .. }
            | HarnessError::Core(_) => CliError::Config(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

impl From<LinevalError> for CliError {
    fn from(e: LinevalError) -> Self {
        let msg = e.to_string();
        match e {
            LinevalError::Diverged { .. } | LinevalError::NonFinite(_) => CliError::Numeric(msg),
            LinevalError::Config(_)
            | LinevalError::SingleClass(_)
            | LinevalError::MissingLabel(_)
            | LinevalError::LengthMismatch { .. }
            | LinevalError::EmptySplit(_) => CliError::Config(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
