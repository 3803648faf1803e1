use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pnda_core::{ImageSample, Verdict};
use serde::{Deserialize, Serialize};

use crate::{Result, SamplerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub score: f64,
    pub verdict: Verdict,
}

/// Sidecar metadata stored next to the partition table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartitionMeta {
    /// `rho + m` for threshold partitions.
    pub threshold: Option<f64>,
    /// RAI fraction for rank-based partitions.
    pub ratio: Option<f64>,
    pub step1_accuracy: Option<f64>,
    pub step2_accuracy: Option<f64>,
    pub config: Option<serde_json::Value>,
}

/// Image id to verdict map produced by the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct RaiPartition {
    pub records: Vec<ScoreRecord>,
    pub meta: PartitionMeta,
    index: HashMap<String, usize>,
}

fn check_scores(scores: &[(String, f64)]) -> Result<()> {
    let mut seen = HashSet::with_capacity(scores.len());
    for (id, s) in scores {
        if !s.is_finite() {
            return Err(SamplerError::NonFiniteScore { id: id.clone(), score: *s });
        }
        if !seen.insert(id.as_str()) {
            return Err(SamplerError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// Threshold partition: RAI iff `score > rho + m`.
pub fn partition(scores: &[(String, f64)], rho: f64, margin: f64) -> Result<RaiPartition> {
    check_scores(scores)?;
    let threshold = rho + margin;
    let records = scores
        .iter()
        .map(|(id, s)| ScoreRecord {
            id: id.clone(),
            score: *s,
            verdict: if *s > threshold { Verdict::Rai } else { Verdict::NonRai },
        })
        .collect();
    RaiPartition::from_records(records, PartitionMeta { threshold: Some(threshold), ..Default::default() })
}

impl RaiPartition {
    pub fn from_records(records: Vec<ScoreRecord>, meta: PartitionMeta) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(SamplerError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { records, meta, index })
    }

    /// Rank partition: the `round(ratio * n)` highest-scoring images are RAI,
    /// ties broken by id. Record order follows the input.
    pub fn from_ratio(scores: &[(String, f64)], ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(SamplerError::Ratio(ratio));
        }
        check_scores(scores)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].1.total_cmp(&scores[a].1).then_with(|| scores[a].0.cmp(&scores[b].0)));
        let count = (ratio * scores.len() as f64).round() as usize;
        let mut rai = vec![false; scores.len()];
        for &i in &order[..count] {
            rai[i] = true;
        }
        let records = scores
            .iter()
            .zip(rai)
            .map(|((id, s), r)| ScoreRecord { id: id.clone(), score: *s, verdict: if r { Verdict::Rai } else { Verdict::NonRai } })
            .collect();
        Self::from_records(records, PartitionMeta { ratio: Some(ratio), ..Default::default() })
    }

    /// Every id marked with the same verdict, scores zero.
    pub fn uniform<'a>(ids: impl IntoIterator<Item = &'a str>, verdict: Verdict) -> Result<Self> {
        let records = ids.into_iter().map(|id| ScoreRecord { id: id.to_string(), score: 0.0, verdict }).collect();
        Self::from_records(records, PartitionMeta::default())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn verdict(&self, id: &str) -> Option<Verdict> {
        self.index.get(id).map(|&i| self.records[i].verdict)
    }

    pub fn rai_count(&self) -> usize {
        self.records.iter().filter(|r| r.verdict.is_rai()).count()
    }

    /// Ids of `corpus` that have no record.
    pub fn missing<'a>(&self, corpus: &'a [ImageSample]) -> Vec<&'a str> {
        corpus.iter().map(|i| i.id()).filter(|id| !self.index.contains_key(*id)).collect()
    }

    /// Precision and recall of the RAI verdict against ground truth.
    /// `None` when any image lacks truth or a record, or a ratio is undefined.
    pub fn precision_recall(&self, corpus: &[ImageSample]) -> Option<(f64, f64)> {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for img in corpus {
            match (self.verdict(img.id())?.is_rai(), img.truth()?.is_rai()) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
        ((tp + fp) > 0 && (tp + fneg) > 0).then(|| (tp as f64 / (tp + fp) as f64, tp as f64 / (tp + fneg) as f64))
    }

    /// Sidecar path for a partition table: `x.csv` becomes `x.meta.json`.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("meta.json")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from("id,score,verdict\n");
        for r in &self.records {
            if r.id.contains([',', '\n', '\r']) {
                return Err(SamplerError::Parse { line: 0, reason: format!("id {:?} cannot be written as a CSV field", r.id) });
            }
            out.push_str(&format!("{},{:.6},{}\n", r.id, r.score, r.verdict));
        }
        Ok(out)
    }

    pub fn from_csv(text: &str, meta: PartitionMeta) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "id,score,verdict" => {}
            _ => return Err(SamplerError::Parse { line: 1, reason: "expected header id,score,verdict".into() }),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |reason: String| SamplerError::Parse { line: i + 1, reason };
            let fields: Vec<&str> = line.split(',').collect();
            let [id, score, verdict] = fields[..] else {
                return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
            };
            let score: f64 = score.trim().parse().map_err(|e| parse_err(format!("score: {e}")))?;
            let verdict: Verdict = verdict.trim().parse().map_err(|e| parse_err(format!("{e}")))?;
            records.push(ScoreRecord { id: id.to_string(), score, verdict });
        }
        Self::from_records(records, meta)
    }

    /// Writes the table and its sidecar.
    pub fn save(&self, csv: &Path) -> Result<()> {
        let mut f = fs::File::create(csv)?;
        f.write_all(self.to_csv()?.as_bytes())?;
        fs::write(Self::sidecar_path(csv), serde_json::to_vec_pretty(&self.meta)?)?;
        Ok(())
    }

    /// Reads a table; the sidecar is optional.
    pub fn load(csv: &Path) -> Result<Self> {
        let text = fs::read_to_string(csv)?;
        let side = Self::sidecar_path(csv);
        let meta = if side.exists() { serde_json::from_slice(&fs::read(side)?)? } else { PartitionMeta::default() };
        Self::from_csv(&text, meta)
    }
}
