use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pnda_lineval::{read_results, ResultsRecord};

use super::Context;
use crate::{CliError, Outputs, Result, RunManifest};

const RESULTS_FILE: &str = "results.jsonl";
const FRAMEWORKS: [&str; 3] = ["simclr", "moco_v2", "byol"];
const MODES: [&str; 4] = ["none", "pda", "nda", "pnda"];

/// Aggregate of one (framework, mode, ratio) cell, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub framework: String,
    pub mode: String,
    pub ratio: Option<f64>,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single seed.
    pub std: Option<f64>,
    /// Mean minus the NONE mean of the same framework.
    pub delta: Option<f64>,
}

/// Every `results.jsonl` below `dir`, sorted by path.
pub fn find_results(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == RESULTS_FILE) {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

fn rank(list: &[&str], s: &str) -> usize {
    list.iter().position(|x| *x == s).unwrap_or(list.len())
}

pub fn summarize(records: &[ResultsRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, String, usize, String, Option<u64>), Vec<f64>> = BTreeMap::new();
    for r in records {
        let key = (
            rank(&FRAMEWORKS, &r.framework),
            r.framework.clone(),
            rank(&MODES, &r.mode),
            r.mode.clone(),
            r.ratio.map(f64::to_bits),
        );
        groups.entry(key).or_default().push(100.0 * r.top1);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((_, framework, _, mode, ratio), v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let std = (n > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
            SummaryRow { framework, mode, ratio: ratio.map(f64::from_bits), n, mean, std, delta: None }
        })
        .collect();
    rows.sort_by(|a, b| {
        (rank(&FRAMEWORKS, &a.framework), &a.framework, rank(&MODES, &a.mode), &a.mode)
            .cmp(&(rank(&FRAMEWORKS, &b.framework), &b.framework, rank(&MODES, &b.mode), &b.mode))
            .then(a.ratio.unwrap_or(-1.0).total_cmp(&b.ratio.unwrap_or(-1.0)))
    });
    let baselines: BTreeMap<String, f64> = rows
        .iter()
        .filter(|r| r.mode == "none" && r.ratio.is_none())
        .map(|r| (r.framework.clone(), r.mean))
        .collect();
    for row in &mut rows {
        if row.mode != "none" || row.ratio.is_some() {
            row.delta = baselines.get(&row.framework).map(|b| row.mean - b);
        }
    }
    rows
}

pub fn render_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("framework,mode,ratio,n,mean,std,delta\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.2}"));
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:.2},{},{}",
            r.framework,
            r.mode,
            r.ratio.map_or(String::new(), |x| x.to_string()),
            r.n,
            r.mean,
            opt(r.std),
            opt(r.delta)
        )
        .expect("string write");
    }
    s
}

fn display_framework(f: &str) -> &str {
    match f {
        "simclr" => "SimCLR",
        "moco_v2" => "MoCo v2",
        "byol" => "BYOL",
        other => other,
    }
}

fn display_mode(m: &str) -> String {
    match m {
        "none" => "None".into(),
        other => other.to_uppercase(),
    }
}

fn cell(row: &SummaryRow) -> String {
    let mut s = match row.std {
        Some(sd) => format!("{:.2}±{sd:.2}", row.mean),
        None => format!("{:.2}", row.mean),
    };
    if let Some(d) = row.delta {
        let marker = if d > 0.0 { "↑" } else if d < 0.0 { "↓" } else { "" };
        write!(s, " {marker}{:.2}", d.abs()).expect("string write");
    }
    s
}

/// Framework rows by mode columns; missing cells are "-". Sweep cells
/// follow in their own table.
pub fn render_markdown(rows: &[SummaryRow]) -> String {
    let table: Vec<&SummaryRow> = rows.iter().filter(|r| r.ratio.is_none()).collect();
    let mut modes: Vec<&str> = MODES.to_vec();
    for r in &table {
        if !modes.contains(&r.mode.as_str()) {
            modes.push(&r.mode);
        }
    }
    let mut frameworks: Vec<&str> = Vec::new();
    for r in rows {
        if !frameworks.contains(&r.framework.as_str()) {
            frameworks.push(&r.framework);
        }
    }
    let mut s = String::from("# Top-1 linear evaluation accuracy (%)\n\n| Framework |");
    for m in &modes {
        write!(s, " {} |", display_mode(m)).expect("string write");
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(modes.len()));
    s.push('\n');
    for f in &frameworks {
        write!(s, "| {} |", display_framework(f)).expect("string write");
        for m in &modes {
            let c = table.iter().find(|r| r.framework == *f && r.mode == *m).map_or("-".to_string(), |r| cell(r));
            write!(s, " {c} |").expect("string write");
        }
        s.push('\n');
    }
    let sweep: Vec<&SummaryRow> = rows.iter().filter(|r| r.ratio.is_some()).collect();
    if !sweep.is_empty() {
        s.push_str("\n## Ratio of positive rotated images\n\n| Framework | Ratio | Top-1 | Seeds |\n|---|---|---|---|\n");
        for r in sweep {
            writeln!(s, "| {} | {} | {} | {} |", display_framework(&r.framework), r.ratio.unwrap_or_default(), cell(r), r.n)
                .expect("string write");
        }
    }
    s
}

/// Aggregates every results file below `results_dir` into `summary.csv`
/// and `summary.md`.
pub fn cmd_report(results_dir: &Path, ctx: &Context) -> Result<(Vec<SummaryRow>, RunManifest)> {
    let mut records = Vec::new();
    for path in find_results(results_dir)? {
        records.extend(read_results(&path)?);
    }
    if records.is_empty() {
        return Err(CliError::Config(format!("no results under {}", results_dir.display())));
    }
    let rows = summarize(&records);
    let mut out = Outputs::create(&ctx.out)?;
    out.write("summary.csv", render_csv(&rows))?;
    out.write("summary.md", render_markdown(&rows))?;
    let manifest = out.finish("report", ctx.config_path.as_deref(), ctx.seed, "ok")?;
    Ok((rows, manifest))
}
