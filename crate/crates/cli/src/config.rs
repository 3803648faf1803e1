use std::path::{Path, PathBuf};

use pnda_harness::{ExperimentConfig, SyntheticCorpusSpec};
use pnda_lineval::LinearProbeConfig;
use pnda_sampler::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    #[default]
    Synthetic,
    /// One subdirectory per class.
    Directory,
}

/// Where images come from. `spec` applies to synthetic corpora, `path` and
/// `size` to directories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub kind: CorpusKind,
    pub spec: SyntheticCorpusSpec,
    /// Directory root; defaults to `PNDA_DATA_DIR`.
    pub path: Option<PathBuf>,
    /// Resize every image to `size x size`; otherwise all images must share one size.
    pub size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Fractions of images, taken by descending score, treated as rotation-agnostic.
    pub ratios: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { ratios: vec![0.0, 0.05, 0.2, 0.3, 1.0] }
    }
}

/// The whole configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub sampler: SamplerConfig,
    pub pretrain: ExperimentConfig,
    pub lineval: LinearProbeConfig,
    pub sweep: SweepConfig,
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key was just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `a.b.c = value`, creating intermediate tables. The value is read as
/// a TOML literal and falls back to a plain string.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} is malformed")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {part:?} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    /// Reads `path` (or starts from defaults), applies overrides, then the seed.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg = Self::from_table(table)?;
        if let Some(seed) = seed {
            cfg.set_seed(seed);
        }
        Ok(cfg)
    }

    /// Seeds every training stage; the corpus seed is left alone.
    pub fn set_seed(&mut self, seed: u64) {
        self.sampler.seed = seed;
        self.pretrain.seed = seed;
        self.lineval.seed = seed;
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialise config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pnda_losses::AugMode;
    use pnda_sampler::Beta1;

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = RunConfig::load(
            None,
            &[
                "sampler.beta2=40".into(),
                "sampler.beta1=\"auto\"".into(),
                "pretrain.mode=pnda".into(),
                "corpus.spec.n_rai=10".into(),
            ],
            Some(7),
        )
        .unwrap();
        assert_eq!(cfg.sampler.beta2, 40);
        assert_eq!(cfg.sampler.beta1, Beta1::Auto);
        assert_eq!(cfg.pretrain.mode, AugMode::Pnda);
        assert_eq!(cfg.pretrain.seed, 7);
        assert_eq!(cfg.corpus.kind, CorpusKind::Synthetic);
        assert_eq!(cfg.corpus.spec.n_rai, 10);
    }

    #[test]
    fn unknown_keys_and_bad_overrides_are_config_errors() {
        for o in ["sampler.nope=1", "sampler", "pretrain.mode=sideways", ".x=1"] {
            match RunConfig::load(None, &[o.to_string()], None) {
                Err(CliError::Config(_)) => {}
                other => panic!("{o}: {other:?}"),
            }
        }
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_table(toml::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
