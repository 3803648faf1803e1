use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{LinevalError, Result};

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRecord {
    pub framework: String,
    pub mode: String,
    pub encoder: String,
    pub top1: f64,
    pub seed: u64,
    pub config_hash: String,
    /// Rotated-positive ratio of a sweep cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

/// SHA-256 of the canonical JSON form; object keys are sorted.
pub fn config_hash<T: Serialize + ?Sized>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config)?;
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&value)?)))
}

/// Appends one JSON line, creating the file if needed.
pub fn append_result(path: &Path, record: &ResultsRecord) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    f.write_all(&line)?;
    Ok(())
}

/// Reads every record; blank lines are skipped.
pub fn read_results(path: &Path) -> Result<Vec<ResultsRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| LinevalError::Parse { line: i + 1, reason: e.to_string() })?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"b":1,"a":{"y":2,"x":3}}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"a":{"x":3,"y":2},"b":1}"#).unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
        let c: serde_json::Value = serde_json::from_str(r#"{"b":2,"a":{"x":3,"y":2}}"#).unwrap();
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
    }

    #[test]
    fn append_and_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.jsonl");
        let rec = |seed| ResultsRecord {
            framework: "simclr".into(),
            mode: "pnda".into(),
            encoder: "conv-8".into(),
            top1: 0.5,
            seed,
            config_hash: "ab".into(),
            ratio: None,
        };
        append_result(&path, &rec(0)).unwrap();
        append_result(&path, &rec(1)).unwrap();
        assert_eq!(read_results(&path).unwrap(), vec![rec(0), rec(1)]);
        std::fs::write(&path, "{not json}\n").unwrap();
        assert!(matches!(read_results(&path), Err(LinevalError::Parse { line: 1, .. })));
    }
}
