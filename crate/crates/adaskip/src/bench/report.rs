//! Report types and their deterministic on-disk forms.
//!
//! Every float leaves through `round6`, so emitting a report, loading it,
//! and emitting again is byte-identical. Wall-clock fields are optional:
//! timing-free runs omit them from JSON and leave their CSV cells empty,
//! keeping the column set fixed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COMPARISON_CSV_HEADER: &str = "strategy,target_2m,task_id,ttft_s,\
decode_s_per_tok,sublayers_per_tok,flop_ratio,top1_agreement,logit_cosine";

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn round6_opt(x: Option<f64>) -> Option<f64> {
    x.map(round6)
}

fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskMetrics {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttft_s: Option<f64>,
    /// Mean seconds per decode forward; absent without timing or when the
    /// task decodes no tokens beyond the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode_s_per_tok: Option<f64>,
    /// Executed sublayers per steady-state decode token, 2M minus the
    /// active skip set.
    pub sublayers_per_tok: f64,
    /// Executed / full analytic sublayer FLOPs for this task.
    pub flop_ratio: f64,
    pub output_tokens: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunAggregates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttft_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode_s_per_tok: Option<f64>,
    pub sublayers_per_tok: f64,
    pub flop_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub strategy: String,
    /// Skipped sublayer count of the executed plan (2m).
    pub target_2m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_digest: Option<String>,
    pub model_id: String,
    pub online: String,
    pub online_window: usize,
    pub tasks: Vec<TaskMetrics>,
    /// Unweighted means over tasks; zeros when the suite is empty.
    pub aggregates: RunAggregates,
}

impl RunReport {
    fn rounded(&self) -> RunReport {
        let mut r = self.clone();
        for t in &mut r.tasks {
            t.ttft_s = round6_opt(t.ttft_s);
            t.decode_s_per_tok = round6_opt(t.decode_s_per_tok);
            t.sublayers_per_tok = round6(t.sublayers_per_tok);
            t.flop_ratio = round6(t.flop_ratio);
        }
        r.aggregates.ttft_s = round6_opt(r.aggregates.ttft_s);
        r.aggregates.decode_s_per_tok = round6_opt(r.aggregates.decode_s_per_tok);
        r.aggregates.sublayers_per_tok = round6(r.aggregates.sublayers_per_tok);
        r.aggregates.flop_ratio = round6(r.aggregates.flop_ratio);
        r
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut bytes =
            serde_json::to_vec_pretty(&self.rounded()).expect("report serialization");
        bytes.push(b'\n');
        bytes
    }

    /// The shared CSV schema; a plain run leaves the divergence cells
    /// empty since it has no full-model reference.
    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut out = String::from(COMPARISON_CSV_HEADER);
        out.push('\n');
        for t in &self.tasks {
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6},,\n",
                csv_field(&self.strategy),
                self.target_2m,
                csv_field(&t.task_id),
                cell(t.ttft_s),
                cell(t.decode_s_per_tok),
                t.sublayers_per_tok,
                t.flop_ratio,
            ));
        }
        out.into_bytes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// Pick the format from the output path's extension.
    pub fn from_path(path: &Path) -> Result<ReportFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(ReportFormat::Json),
            Some("csv") => Ok(ReportFormat::Csv),
            _ => Err(Error::InvalidInput(format!(
                "{}: report paths must end in .json or .csv",
                path.display()
            ))),
        }
    }
}

pub fn emit_run_report(path: &Path, report: &RunReport) -> Result<()> {
    let bytes = match ReportFormat::from_path(path)? {
        ReportFormat::Json => report.canonical_bytes(),
        ReportFormat::Csv => report.csv_bytes(),
    };
    crate::write_atomic(path, &bytes)
}

pub fn load_run_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// One (strategy, target, task) measurement of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonRow {
    pub strategy: String,
    pub target_2m: usize,
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttft_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode_s_per_tok: Option<f64>,
    pub sublayers_per_tok: f64,
    pub flop_ratio: f64,
    pub top1_agreement: f64,
    pub logit_cosine: f64,
}

/// A cell that failed to build or run; the rest of the grid is unaffected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellError {
    pub strategy: String,
    pub target_2m: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonReport {
    pub model_id: String,
    pub profile_digest: String,
    pub online_window: usize,
    pub rows: Vec<ComparisonRow>,
    pub cell_errors: Vec<CellError>,
}

impl ComparisonReport {
    fn rounded(&self) -> ComparisonReport {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.ttft_s = round6_opt(row.ttft_s);
            row.decode_s_per_tok = round6_opt(row.decode_s_per_tok);
            row.sublayers_per_tok = round6(row.sublayers_per_tok);
            row.flop_ratio = round6(row.flop_ratio);
            row.top1_agreement = round6(row.top1_agreement);
            row.logit_cosine = round6(row.logit_cosine);
        }
        r
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut bytes =
            serde_json::to_vec_pretty(&self.rounded()).expect("report serialization");
        bytes.push(b'\n');
        bytes
    }

    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut out = String::from(COMPARISON_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                csv_field(&r.strategy),
                r.target_2m,
                csv_field(&r.task_id),
                cell(r.ttft_s),
                cell(r.decode_s_per_tok),
                r.sublayers_per_tok,
                r.flop_ratio,
                r.top1_agreement,
                r.logit_cosine,
            ));
        }
        out.into_bytes()
    }
}

/// Write `<dir>/comparison.csv` and `<dir>/comparison.json`.
pub fn emit_comparison(dir: &Path, report: &ComparisonReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    crate::write_atomic(&dir.join("comparison.csv"), &report.csv_bytes())?;
    crate::write_atomic(&dir.join("comparison.json"), &report.canonical_bytes())
}

pub fn load_comparison(path: &Path) -> Result<ComparisonReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}
