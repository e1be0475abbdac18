use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "iteration,train_loss,test_accuracy,touched_params,rank_w1,rank_w2";

/// One line of a per-seed metrics file. Optional cells are written empty.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub train_loss: f64,
    pub test_accuracy: Option<f64>,
    pub touched_params: usize,
    pub rank_w1: Option<usize>,
    pub rank_w2: Option<usize>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(40 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iteration,
            r.train_loss,
            opt(r.test_accuracy),
            r.touched_params,
            opt(r.rank_w1),
            opt(r.rank_w2)
        );
    }
    out
}

pub fn rows_from_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::format("header", "metrics CSV header mismatch"));
    }
    fn cell<T: std::str::FromStr>(s: &str, field: &'static str) -> Result<Option<T>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| Error::format(field, format!("cannot parse {s:?}")))
    }
    fn need<T>(v: Option<T>, field: &'static str) -> Result<T> {
        v.ok_or_else(|| Error::format(field, "empty cell"))
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::format("row", format!("expected 6 cells in {line:?}")));
            }
            Ok(MetricsRow {
                iteration: need(cell(f[0], "iteration")?, "iteration")?,
                train_loss: need(cell(f[1], "train_loss")?, "train_loss")?,
                test_accuracy: cell(f[2], "test_accuracy")?,
                touched_params: need(cell(f[3], "touched_params")?, "touched_params")?,
                rank_w1: cell(f[4], "rank_w1")?,
                rank_w2: cell(f[5], "rank_w2")?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Sidecar written next to each `seed_<s>.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub label: String,
    /// Canonical config with seeds and output cleared; runs are only
    /// aggregated together when these match.
    pub config: String,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default)]
    pub error: Option<String>,
    pub final_accuracy: Option<f64>,
    pub iterations: u64,
}

pub fn csv_path(dir: &Path, seed: u64) -> std::path::PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

pub fn meta_path(dir: &Path, seed: u64) -> std::path::PathBuf {
    dir.join(format!("seed_{seed}.meta.json"))
}

pub fn write_run(dir: &Path, rows: &[MetricsRow], meta: &RunMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = csv_path(dir, meta.seed);
    fs::write(&csv, rows_to_csv(rows)).map_err(|e| Error::io(&csv, e))?;
    let mp = meta_path(dir, meta.seed);
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    fs::write(&mp, json + "\n").map_err(|e| Error::io(&mp, e))
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    /// Successful seeds.
    pub n: usize,
    pub failed: Vec<u64>,
    pub mean: f64,
    pub std: f64,
}

impl SummaryRow {
    pub fn cell(&self) -> String {
        if self.n == 0 {
            "n/a".into()
        } else {
            format_cell(self.mean, self.std)
        }
    }
}

/// Groups runs by label. Runs sharing a label must share a config.
pub fn aggregate_metas(metas: &[RunMeta]) -> Result<Vec<SummaryRow>> {
    if metas.is_empty() {
        return Err(Error::Aggregation("no runs to aggregate".into()));
    }
    let mut groups: BTreeMap<&str, Vec<&RunMeta>> = BTreeMap::new();
    for m in metas {
        groups.entry(&m.label).or_default().push(m);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (label, runs) in groups {
        if let Some(odd) = runs.iter().find(|r| r.config != runs[0].config) {
            return Err(Error::Aggregation(format!(
                "label {label:?}: seed {} was run with a different config than seed {}",
                odd.seed, runs[0].seed
            )));
        }
        let mut accs = Vec::new();
        let mut failed = Vec::new();
        for r in &runs {
            match (&r.status, r.final_accuracy) {
                (RunStatus::Ok, Some(a)) => accs.push(a),
                _ => failed.push(r.seed),
            }
        }
        let (mean, std) = mean_std(&accs);
        out.push(SummaryRow {
            label: label.to_string(),
            n: accs.len(),
            failed,
            mean,
            std,
        });
    }
    Ok(out)
}

/// Reads every `*.meta.json` in `dir` and aggregates them.
pub fn aggregate(dir: &Path) -> Result<Vec<SummaryRow>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".meta.json"))
        .collect();
    paths.sort();
    let mut metas = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let meta: RunMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Aggregation(format!("{}: {e}", p.display())))?;
        metas.push(meta);
    }
    aggregate_metas(&metas)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("label,n,failed,mean_accuracy,std_accuracy\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:.2},{:.2}", r.label, r.n, r.failed.len(), r.mean, r.std);
    }
    out
}

pub fn summary_markdown(rows: &[SummaryRow]) -> String {
    let mut out = String::from("| Method | Accuracy | Runs | Failed seeds |\n|---|---|---|---|\n");
    for r in rows {
        let failed = if r.failed.is_empty() {
            "-".to_string()
        } else {
            r.failed.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(out, "| {} | {} | {} | {} |", r.label, r.cell(), r.n, failed);
    }
    out
}
