use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Completion marker of a command; lists every artifact it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    /// Paths relative to `out_dir`, in write order.
    pub artifacts: Vec<String>,
    pub status: String,
    pub finished_unix: u64,
}

/// Output directory that records what was written into it.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        // A stale marker must not outlive a rerun.
        let stale = dir.join(MANIFEST_FILE);
        if stale.exists() {
            fs::remove_file(stale)?;
        }
        Ok(Self { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path for `name`, recorded as an artifact.
    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    /// Writes the manifest through a temporary file and a rename.
    pub fn finish(self, command: &str, config_path: Option<&Path>, seed: Option<u64>, status: &str) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            seed,
            out_dir: self.dir.clone(),
            artifacts: self.artifacts,
            status: status.to_string(),
            finished_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_string_pretty(&manifest)? + "\n")?;
        fs::rename(&tmp, self.dir.join(MANIFEST_FILE))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_artifacts_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::create(dir.path()).unwrap();
        out.write("a.txt", "1").unwrap();
        out.write("sub/b.txt", "2").unwrap();
        out.write("a.txt", "3").unwrap();
        let m = out.finish("test", None, Some(1), "ok").unwrap();
        assert_eq!(m.artifacts, vec!["a.txt", "sub/b.txt"]);
        let back: RunManifest = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }
}
