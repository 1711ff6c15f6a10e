//! The strategy comparison grid: (strategy, target) cells over a shared
//! task suite, with full-model divergence measured per task.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bench::metrics::{divergence, teacher_forced_logits};
use crate::bench::report::{
    emit_comparison, CellError, ComparisonReport, ComparisonRow,
};
use crate::bench::runner::{run_task, OnlineMode, RunOptions};
use crate::bench::task::Task;
use crate::error::{Error, Result};
use crate::model::{encode_prompt, Model};
use crate::policy::{
    baseline_plan, build_offline_plan, save_plan, PlanOptions, PlanSize, SkipPlan, Strategy,
};
use crate::profiler::SimilarityProfile;

/// A column of the grid: one of the skipping strategies, or the unmodified
/// model as the reference row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareStrategy {
    Full,
    Skip(Strategy),
}

impl fmt::Display for CompareStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompareStrategy::Full => f.write_str("full"),
            CompareStrategy::Skip(s) => s.fmt(f),
        }
    }
}

impl FromStr for CompareStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            Ok(CompareStrategy::Full)
        } else {
            Ok(CompareStrategy::Skip(s.parse()?))
        }
    }
}

impl CompareStrategy {
    /// Parse a comma list, where "all" means the full model plus every
    /// skipping strategy.
    pub fn parse_list(spec: &str) -> Result<Vec<CompareStrategy>> {
        if spec == "all" {
            return Ok(vec![
                CompareStrategy::Full,
                CompareStrategy::Skip(Strategy::Adaskip),
                CompareStrategy::Skip(Strategy::EarlySkip),
                CompareStrategy::Skip(Strategy::Periodic),
                CompareStrategy::Skip(Strategy::EarlyExit),
            ]);
        }
        spec.split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<_>>>()
    }
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    /// Online extension mode for adaskip cells; other strategies carry no
    /// threshold and always run statically.
    pub online: OnlineMode,
    pub online_window: usize,
    pub timing: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            online: OnlineMode::PlannedWindow,
            online_window: 20,
            timing: true,
        }
    }
}

/// Parallelism within a cell, capped by ADASKIP_THREADS when set.
fn pool_from_spec(spec: Option<&str>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(v) = spec {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "ADASKIP_THREADS must be a positive integer, got {v:?}"
                ))
            })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn full_plan() -> SkipPlan {
    SkipPlan {
        strategy: Strategy::Adaskip,
        alpha: 1.0,
        m: 0,
        skipped: Vec::new(),
        protect_first: false,
        protect_last: false,
        beta: None,
        source_profile_digest: None,
    }
}

/// Run every (strategy, target) cell over the task suite and write
/// `comparison.csv`, `comparison.json`, and the per-cell plans under
/// `out_dir`. The profile's calibration tasks must be disjoint from the
/// evaluation suite, or every quality number would be self-graded.
///
/// Cells fail independently: a cell whose plan is infeasible or whose run
/// errors lands in `cell_errors` without disturbing the rest of the grid.
pub fn compare_strategies(
    model: &Model,
    profile: &SimilarityProfile,
    tasks: &[Task],
    targets: &[usize],
    strategies: &[CompareStrategy],
    out_dir: &Path,
    options: &CompareOptions,
) -> Result<ComparisonReport> {
    profile.validate()?;
    let model_id = model.weights.content_digest();
    if profile.model_id != model_id {
        return Err(Error::ProfileMismatch(format!(
            "profile measured on {} but comparing {}",
            profile.model_id, model_id
        )));
    }
    if profile.n_layers() != model.config().n_layers {
        return Err(Error::ProfileMismatch(format!(
            "profile covers {} layers, model has {}",
            profile.n_layers(),
            model.config().n_layers
        )));
    }
    let mut ids = BTreeSet::new();
    for t in tasks {
        if !ids.insert(t.id.as_str()) {
            return Err(Error::TaskValidation(format!(
                "duplicate task id {:?}",
                t.id
            )));
        }
    }
    let calibration: BTreeSet<&str> =
        profile.source_task_ids.iter().map(String::as_str).collect();
    let overlap: Vec<String> = ids
        .intersection(&calibration)
        .map(|s| s.to_string())
        .collect();
    if !overlap.is_empty() {
        return Err(Error::CalibrationOverlap(overlap));
    }

    let mut cells: Vec<(CompareStrategy, usize)> = Vec::new();
    for &s in strategies {
        match s {
            // The full model is one reference cell regardless of targets.
            CompareStrategy::Full => cells.push((s, 0)),
            CompareStrategy::Skip(_) => {
                cells.extend(targets.iter().map(|&t| (s, t)));
            }
        }
    }

    let plans_dir = out_dir.join("plans");
    std::fs::create_dir_all(&plans_dir).map_err(|e| Error::io(&plans_dir, e))?;
    let pool = pool_from_spec(std::env::var("ADASKIP_THREADS").ok().as_deref())?;

    let mut rows = Vec::new();
    let mut cell_errors = Vec::new();
    for (strategy, target) in cells {
        match run_cell(
            model, profile, tasks, strategy, target, &plans_dir, options, &pool,
        ) {
            Ok(cell_rows) => rows.extend(cell_rows),
            Err(e) => cell_errors.push(CellError {
                strategy: strategy.to_string(),
                target_2m: target,
                message: e.to_string(),
            }),
        }
    }

    let report = ComparisonReport {
        model_id,
        profile_digest: profile.digest(),
        online_window: options.online_window,
        rows,
        cell_errors,
    };
    emit_comparison(out_dir, &report)?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    model: &Model,
    profile: &SimilarityProfile,
    tasks: &[Task],
    strategy: CompareStrategy,
    target: usize,
    plans_dir: &Path,
    options: &CompareOptions,
    pool: &rayon::ThreadPool,
) -> Result<Vec<ComparisonRow>> {
    let plan = match strategy {
        CompareStrategy::Full => full_plan(),
        CompareStrategy::Skip(Strategy::Adaskip) => build_offline_plan(
            profile,
            PlanSize::TargetSublayers(target),
            PlanOptions::default(),
        )?,
        CompareStrategy::Skip(baseline) => baseline_plan(
            baseline,
            model.config().n_layers,
            PlanSize::TargetSublayers(target),
        )?,
    };
    save_plan(&plans_dir.join(format!("{strategy}_{target}.json")), &plan)?;

    let run_options = RunOptions {
        online: match strategy {
            CompareStrategy::Skip(Strategy::Adaskip) => options.online,
            _ => OnlineMode::Off,
        },
        online_window: options.online_window,
        timing: options.timing,
    };
    pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let row = (|| -> Result<ComparisonRow> {
                    let (metrics, output) = run_task(model, &plan, task, &run_options)?;
                    let prompt = encode_prompt(&task.prompt);
                    let reference = teacher_forced_logits(model, &prompt, &output.tokens)?;
                    let d = divergence(&reference, &output.logits)?;
                    Ok(ComparisonRow {
                        strategy: strategy.to_string(),
                        target_2m: plan.skipped.len(),
                        task_id: task.id.clone(),
                        ttft_s: metrics.ttft_s,
                        decode_s_per_tok: metrics.decode_s_per_tok,
                        sublayers_per_tok: metrics.sublayers_per_tok,
                        flop_ratio: metrics.flop_ratio,
                        top1_agreement: d.top1_agreement,
                        logit_cosine: d.mean_logit_cosine,
                    })
                })();
                row.map_err(|e| e.in_task(&task.id))
            })
            .collect()
    })
}
