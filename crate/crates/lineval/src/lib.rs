//! Linear evaluation: a softmax classifier trained on frozen, globally
//! pooled encoder features and scored by held-out top-1 accuracy.

mod config;
mod error;
mod features;
mod probe;
mod results;

pub use config::LinearProbeConfig;
pub use error::LinevalError;
pub use features::{corpus_labels, extract_features, parameter_digest};
pub use probe::{linear_probe, linear_probe_split, stratified_split, LinearClassifier, ProbeResult};
pub use results::{append_result, config_hash, read_results, ResultsRecord};

pub use ndarray::Array2;

pub type Result<T, E = LinevalError> = std::result::Result<T, E>;
