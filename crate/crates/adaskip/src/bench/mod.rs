//! Plan execution and measurement: task suites, FLOP accounting, quality
//! proxies, single-plan runs, and the multi-strategy comparison grid.

mod compare;
mod flops;
mod metrics;
mod report;
mod runner;
mod task;

pub use compare::{compare_strategies, CompareOptions, CompareStrategy};
pub use flops::{
    attention_decode_flops, attention_prefill_flops, ffn_token_flops, FlopLedger,
};
pub use metrics::{divergence, hit_rate, teacher_forced_logits, top_k, DivergenceReport, KindFilter};
pub use report::{
    emit_comparison, emit_run_report, load_comparison, load_run_report, CellError,
    ComparisonReport, ComparisonRow, ReportFormat, RunAggregates, RunReport, TaskMetrics,
    COMPARISON_CSV_HEADER,
};
pub use runner::{run_task, run_tasks, OnlineMode, PlanDriver, RunOptions, TokenRecord};
pub use task::{load_tasks, Task};
