//! Executes a skip plan over tasks and measures it.
//!
//! The decode loop here mirrors `model::generate` exactly (prefill, then
//! one forward per further token) but is unrolled to put timestamps on the
//! phase boundaries, so a zero-skip run reproduces `generate` bit for bit.
//!
//! Timing protocol: one warmup run, a single sequence at a time, then the
//! median of three timed runs for both time-to-first-token and seconds per
//! decode forward. Disabling timing collapses this to a single run and
//! leaves the wall-clock fields out of the report entirely, which keeps
//! report bytes reproducible across machines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::bench::flops::FlopLedger;
use crate::bench::report::{RunAggregates, RunReport, TaskMetrics};
use crate::bench::task::Task;
use crate::error::{Error, Result};
use crate::model::{
    argmax_logits, encode_prompt, prefill, GenerateDriver, GenerateOutput, KvCache, Model,
    ModelConfig, Phase, PlanResolution, SublayerIo, SublayerKind, SublayerRef,
};
use crate::policy::{OnlineOutcome, OnlineState, SkipPlan};

/// Decode-time behavior while the online window is open.
///
/// `PlannedWindow` applies the offline plan during the window, so the
/// candidates are the FFNs the plan left running. `FullWindow` executes
/// every FFN during the window to measure all of them; attention skips
/// stay in force because a sublayer skipped at prefill has no KV history
/// to resume from. `Off` disables the extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnlineMode {
    Off,
    PlannedWindow,
    FullWindow,
}

impl fmt::Display for OnlineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OnlineMode::Off => "off",
            OnlineMode::PlannedWindow => "planned-window",
            OnlineMode::FullWindow => "full-window",
        })
    }
}

impl FromStr for OnlineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(OnlineMode::Off),
            "planned-window" => Ok(OnlineMode::PlannedWindow),
            "full-window" => Ok(OnlineMode::FullWindow),
            _ => Err(Error::InvalidInput(format!("unknown online mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub online: OnlineMode,
    /// Decode forwards observed before the skip set may grow.
    pub online_window: usize,
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            online: OnlineMode::PlannedWindow,
            online_window: 20,
            timing: true,
        }
    }
}

/// What one forward executed: filled in by the driver, one record per
/// token in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenRecord {
    pub phase: Phase,
    pub position: usize,
    pub executed: BTreeSet<SublayerRef>,
}

/// Applies a plan (plus the optional online extension) and records every
/// execution decision. The online window closes at a token boundary: the
/// first decode forward after every candidate has a full window runs under
/// the extended set.
pub struct PlanDriver<'a> {
    plan: &'a SkipPlan,
    offline: BTreeMap<SublayerRef, f64>,
    mode: OnlineMode,
    online: Option<OnlineState>,
    adaptive: Option<BTreeMap<SublayerRef, f64>>,
    /// Record index of the first forward run under the extended set.
    finalized_at: Option<usize>,
    records: Vec<TokenRecord>,
}

impl<'a> PlanDriver<'a> {
    pub fn new(plan: &'a SkipPlan, config: &ModelConfig, options: &RunOptions) -> Result<Self> {
        plan.validate_for_model(config.n_layers)?;
        let offline = plan.scale_map();
        // The extension needs a threshold; plans without one (baselines,
        // the full model) run statically whatever the mode says.
        let mode = match plan.beta {
            Some(_) if options.online != OnlineMode::Off => options.online,
            _ => OnlineMode::Off,
        };
        let online = match mode {
            OnlineMode::Off => None,
            OnlineMode::PlannedWindow | OnlineMode::FullWindow => {
                let candidates: BTreeSet<SublayerRef> = (0..config.n_layers)
                    .map(SublayerRef::ffn)
                    .filter(|s| mode == OnlineMode::FullWindow || !offline.contains_key(s))
                    .collect();
                Some(OnlineState::new(
                    options.online_window,
                    plan.beta.expect("mode checked above"),
                    candidates,
                )?)
            }
        };
        Ok(PlanDriver {
            plan,
            offline,
            mode,
            online,
            adaptive: None,
            finalized_at: None,
            records: Vec::new(),
        })
    }

    pub fn records(&self) -> &[TokenRecord] {
        &self.records
    }

    pub fn online_outcome(&self) -> Option<&OnlineOutcome> {
        self.online.as_ref().and_then(|s| s.outcome())
    }

    /// The skip set decode settles into: the extended set once the window
    /// closed, the offline set otherwise.
    pub fn final_active(&self) -> BTreeSet<SublayerRef> {
        match &self.adaptive {
            Some(a) => a.keys().copied().collect(),
            None => self.offline.keys().copied().collect(),
        }
    }

    /// Index into `records` from which decode forwards ran under
    /// `final_active`. None means the run never reached that state (a
    /// full-window run whose window never closed).
    fn steady_from(&self) -> Option<usize> {
        match (self.finalized_at, self.mode) {
            (Some(i), _) => Some(i),
            (None, OnlineMode::FullWindow) if self.online.is_some() => None,
            _ => Some(0),
        }
    }
}

impl GenerateDriver for PlanDriver<'_> {
    fn begin_token(&mut self, phase: Phase, position: usize) -> Result<()> {
        if phase == Phase::Decode && self.adaptive.is_none() {
            if let Some(state) = &mut self.online {
                if state.window_complete() {
                    let outcome = state.finalize(self.plan)?;
                    self.adaptive = Some(
                        outcome
                            .skipped_p
                            .iter()
                            .map(|s| (s.sublayer(), s.scale))
                            .collect(),
                    );
                    self.finalized_at = Some(self.records.len());
                }
            }
        }
        self.records.push(TokenRecord {
            phase,
            position,
            executed: BTreeSet::new(),
        });
        Ok(())
    }

    fn resolve(
        &mut self,
        sublayer: SublayerRef,
        phase: Phase,
        _position: usize,
    ) -> Result<PlanResolution> {
        let scale = match &self.adaptive {
            Some(map) => map.get(&sublayer),
            None => {
                // During a full-window decode every FFN runs; attention
                // keeps its plan since its KV history is already gone.
                if self.mode == OnlineMode::FullWindow
                    && phase == Phase::Decode
                    && sublayer.kind == SublayerKind::Ffn
                {
                    None
                } else {
                    self.offline.get(&sublayer)
                }
            }
        };
        Ok(match scale {
            Some(&scale) => PlanResolution::Skip { scale },
            None => {
                let rec = self.records.last_mut().expect("begin_token precedes resolve");
                rec.executed.insert(sublayer);
                PlanResolution::Execute
            }
        })
    }

    fn observe(&mut self, io: &SublayerIo) -> Result<()> {
        if self.adaptive.is_some() {
            return Ok(());
        }
        match &mut self.online {
            Some(state) => state.observe(io),
            None => Ok(()),
        }
    }
}

struct SingleRun {
    output: GenerateOutput,
    records: Vec<TokenRecord>,
    final_active: BTreeSet<SublayerRef>,
    steady_from: Option<usize>,
    ttft_s: f64,
    decode_s: f64,
    decode_forwards: usize,
}

fn execute_once(
    model: &Model,
    plan: &SkipPlan,
    prompt: &[u32],
    max_new: usize,
    options: &RunOptions,
) -> Result<SingleRun> {
    let cfg = model.config();
    let total = prompt.len() + max_new.saturating_sub(1);
    if total > cfg.max_seq_len {
        return Err(Error::InvalidInput(format!(
            "prompt ({}) plus decode ({}) needs {} positions, max_seq_len is {}",
            prompt.len(),
            max_new.saturating_sub(1),
            total,
            cfg.max_seq_len
        )));
    }
    let mut driver = PlanDriver::new(plan, cfg, options)?;
    let mut kv = KvCache::new(cfg.n_layers, cfg.d_model);
    let start = Instant::now();
    let first_logits = prefill(model, prompt, &mut kv, &mut driver)?;
    let ttft_s = start.elapsed().as_secs_f64();

    let (tokens, logits, decode_s, decode_forwards) = if max_new == 0 {
        (Vec::new(), Vec::new(), 0.0, 0)
    } else {
        let mut tokens = vec![argmax_logits(&first_logits)];
        let mut logits = vec![first_logits];
        let decode_start = Instant::now();
        for _ in 1..max_new {
            let last = *tokens.last().unwrap();
            let l = model.forward_token(last, &mut kv, Phase::Decode, &mut driver)?;
            tokens.push(argmax_logits(&l));
            logits.push(l);
        }
        (tokens, logits, decode_start.elapsed().as_secs_f64(), max_new - 1)
    };
    let final_active = driver.final_active();
    let steady_from = driver.steady_from();
    Ok(SingleRun {
        output: GenerateOutput { tokens, logits },
        records: driver.records,
        final_active,
        steady_from,
        ttft_s,
        decode_s,
        decode_forwards,
    })
}

fn median3(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    samples[samples.len() / 2]
}

/// Run one task under the plan: warmup plus three timed passes when timing
/// is on, one pass otherwise. Returns the metrics and the (deterministic)
/// generation of the final pass.
pub fn run_task(
    model: &Model,
    plan: &SkipPlan,
    task: &Task,
    options: &RunOptions,
) -> Result<(TaskMetrics, GenerateOutput)> {
    let cfg = model.config();
    let prompt = encode_prompt(&task.prompt);
    let passes = if options.timing { 4 } else { 1 };
    let mut ttfts = Vec::new();
    let mut decode_rates = Vec::new();
    let mut last: Option<SingleRun> = None;
    for pass in 0..passes {
        let run = execute_once(model, plan, &prompt, task.max_new_tokens, options)?;
        if let Some(prev) = &last {
            assert_eq!(
                prev.output.tokens, run.output.tokens,
                "repeated passes of one task must emit identical tokens"
            );
        }
        if options.timing && pass > 0 {
            ttfts.push(run.ttft_s);
            if run.decode_forwards > 0 {
                decode_rates.push(run.decode_s / run.decode_forwards as f64);
            }
        }
        last = Some(run);
    }
    let run = last.expect("at least one pass");

    let all: Vec<SublayerRef> = (0..cfg.n_layers)
        .flat_map(|l| [SublayerRef::attn(l), SublayerRef::ffn(l)])
        .collect();

    // Static plans make every prefill forward identical; charge the
    // whole-prefill formula once per sublayer off the first record.
    let prefill_executed = &run.records[0].executed;
    let mut ledger = FlopLedger::new(cfg);
    for s in &all {
        ledger.charge_prefill(s.kind, prompt.len(), prefill_executed.contains(s));
    }
    let mut decode_index = 0usize;
    for (i, rec) in run.records.iter().enumerate() {
        match rec.phase {
            Phase::Prefill => assert_eq!(
                &rec.executed, prefill_executed,
                "prefill skip set must be static"
            ),
            Phase::Decode => {
                for s in &all {
                    ledger.charge_decode(s.kind, rec.position + 1, rec.executed.contains(s));
                }
                // Steady-state forwards must execute exactly the
                // complement of the settled skip set.
                if run.steady_from.is_some_and(|from| i >= from) {
                    let expected: BTreeSet<SublayerRef> = all
                        .iter()
                        .filter(|s| !run.final_active.contains(s))
                        .copied()
                        .collect();
                    assert_eq!(
                        rec.executed, expected,
                        "decode forward {decode_index} disagrees with the active skip set"
                    );
                }
                decode_index += 1;
            }
        }
    }

    let metrics = TaskMetrics {
        task_id: task.id.clone(),
        ttft_s: options.timing.then(|| median3(ttfts)),
        decode_s_per_tok: if options.timing && !decode_rates.is_empty() {
            Some(median3(decode_rates))
        } else {
            None
        },
        sublayers_per_tok: (cfg.n_sublayers() - run.final_active.len()) as f64,
        flop_ratio: ledger.ratio(),
        output_tokens: run.output.tokens.clone(),
    };
    Ok((metrics, run.output))
}

/// Run every task under the plan and aggregate.
pub fn run_tasks(
    model: &Model,
    plan: &SkipPlan,
    tasks: &[Task],
    options: &RunOptions,
) -> Result<RunReport> {
    plan.validate_for_model(model.config().n_layers)?;
    let mut metrics = Vec::with_capacity(tasks.len());
    for task in tasks {
        let (m, _) = run_task(model, plan, task, options).map_err(|e| e.in_task(&task.id))?;
        metrics.push(m);
    }
    let aggregates = aggregate(&metrics);
    Ok(RunReport {
        strategy: plan.strategy.to_string(),
        target_2m: plan.skipped.len(),
        plan_digest: Some(plan.digest()),
        model_id: model.weights.content_digest(),
        online: options.online.to_string(),
        online_window: options.online_window,
        tasks: metrics,
        aggregates,
    })
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

fn aggregate(tasks: &[TaskMetrics]) -> RunAggregates {
    let n = tasks.len() as f64;
    let mean = |f: fn(&TaskMetrics) -> f64| {
        if tasks.is_empty() {
            0.0
        } else {
            tasks.iter().map(f).sum::<f64>() / n
        }
    };
    RunAggregates {
        ttft_s: mean_opt(tasks.iter().map(|t| t.ttft_s)),
        decode_s_per_tok: mean_opt(tasks.iter().map(|t| t.decode_s_per_tok)),
        sublayers_per_tok: mean(|t| t.sublayers_per_tok),
        flop_ratio: mean(|t| t.flop_ratio),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::flops::{
        attention_decode_flops, attention_prefill_flops, ffn_token_flops,
    };
    use crate::model::{generate, init_model, FixedPlanDriver, VOCAB_SIZE};
    use crate::policy::{PlannedSkip, Strategy};

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 3,
            d_model: 8,
            n_heads: 2,
            ffn_dim: 16,
            vocab_size: VOCAB_SIZE,
            max_seq_len: 64,
            norm_eps: 1e-5,
        }
    }

    fn model(seed: u64) -> Model {
        Model::new(init_model(&config(), seed).unwrap())
    }

    fn empty_plan() -> SkipPlan {
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

    fn skip_pair_plan(layer: usize, beta: Option<f64>) -> SkipPlan {
        SkipPlan {
            strategy: Strategy::Adaskip,
            alpha: 1.5,
            m: 1,
            skipped: vec![
                PlannedSkip {
                    layer,
                    kind: SublayerKind::Attention,
                    scale: 1.0,
                },
                PlannedSkip {
                    layer,
                    kind: SublayerKind::Ffn,
                    scale: 1.0,
                },
            ],
            protect_first: false,
            protect_last: false,
            beta,
            source_profile_digest: None,
        }
    }

    fn task(id: &str, prompt: &str, max_new: usize) -> Task {
        Task {
            id: id.to_string(),
            prompt: prompt.to_string(),
            max_new_tokens: max_new,
        }
    }

    fn no_timing() -> RunOptions {
        RunOptions {
            timing: false,
            ..RunOptions::default()
        }
    }

    #[test]
    fn zero_skip_run_matches_plain_generation_bitwise() {
        let m = model(11);
        let prompt = encode_prompt("check me");
        let plain = generate(&m, &prompt, 6, &mut FixedPlanDriver::full()).unwrap();
        let (metrics, output) =
            run_task(&m, &empty_plan(), &task("t", "check me", 6), &no_timing()).unwrap();
        assert_eq!(output.tokens, plain.tokens);
        assert_eq!(output.logits, plain.logits);
        assert_eq!(metrics.flop_ratio, 1.0);
        assert_eq!(metrics.sublayers_per_tok, 6.0);
        assert_eq!(metrics.ttft_s, None);
        assert_eq!(metrics.decode_s_per_tok, None);
    }

    #[test]
    fn static_skip_accounting_is_exact() {
        let m = model(11);
        let plan = skip_pair_plan(1, None);
        let t = task("t", "abcd", 5);
        let (metrics, _) = run_task(&m, &plan, &t, &no_timing()).unwrap();
        // 6 sublayers, 2 skipped.
        assert_eq!(metrics.sublayers_per_tok, 4.0);

        let prompt_len = "abcd".len() + 1;
        let (d, f) = (8, 16);
        let full_prefill = 3.0 * attention_prefill_flops(d, prompt_len)
            + 3.0 * ffn_token_flops(d, f) * prompt_len as f64;
        let mut full_decode = 0.0;
        for pos in prompt_len..prompt_len + 4 {
            full_decode += 3.0 * attention_decode_flops(d, pos + 1) + 3.0 * ffn_token_flops(d, f);
        }
        // The skipped pair removes exactly one layer's share everywhere.
        let executed = full_prefill + full_decode
            - attention_prefill_flops(d, prompt_len)
            - ffn_token_flops(d, f) * prompt_len as f64
            - (prompt_len..prompt_len + 4)
                .map(|pos| attention_decode_flops(d, pos + 1) + ffn_token_flops(d, f))
                .sum::<f64>();
        let expected = executed / (full_prefill + full_decode);
        assert!((metrics.flop_ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_new_tokens_measures_prefill_only() {
        let m = model(3);
        let t = task("t", "prefill only", 0);
        let (metrics, output) = run_task(&m, &empty_plan(), &t, &no_timing()).unwrap();
        assert!(output.tokens.is_empty());
        assert_eq!(metrics.output_tokens, Vec::<u32>::new());
        assert_eq!(metrics.decode_s_per_tok, None);
        assert_eq!(metrics.flop_ratio, 1.0);
        // Timing on: TTFT exists even with nothing decoded.
        let timed = RunOptions {
            timing: true,
            ..RunOptions::default()
        };
        let (metrics, _) = run_task(&m, &empty_plan(), &t, &timed).unwrap();
        assert!(metrics.ttft_s.is_some());
        assert_eq!(metrics.decode_s_per_tok, None);
    }

    #[test]
    fn online_extension_grows_the_skip_set_at_the_window_boundary() {
        let m = model(9);
        // beta = -1: every candidate's window mean is strictly above it,
        // so all executing FFNs join the skip set after the window.
        let plan = skip_pair_plan(1, Some(-1.0));
        let options = RunOptions {
            online: OnlineMode::PlannedWindow,
            online_window: 2,
            timing: false,
        };
        let prompt = encode_prompt("window");
        let mut driver = PlanDriver::new(&plan, m.config(), &options).unwrap();
        generate(&m, &prompt, 6, &mut driver).unwrap();

        let outcome = driver.online_outcome().expect("window closed");
        assert_eq!(
            outcome
                .extra
                .iter()
                .map(PlannedSkip::sublayer)
                .collect::<Vec<_>>(),
            vec![SublayerRef::ffn(0), SublayerRef::ffn(2)]
        );
        let skipped_p: BTreeSet<SublayerRef> =
            outcome.skipped_p.iter().map(PlannedSkip::sublayer).collect();
        assert!(plan.skip_set().is_subset(&skipped_p));
        assert_eq!(driver.final_active(), skipped_p);

        let decode: Vec<&TokenRecord> = driver
            .records()
            .iter()
            .filter(|r| r.phase == Phase::Decode)
            .collect();
        assert_eq!(decode.len(), 5);
        // Window forwards run the offline plan (4 executions), later
        // forwards also lose the two extended FFNs.
        assert_eq!(decode[0].executed.len(), 4);
        assert_eq!(decode[1].executed.len(), 4);
        for rec in &decode[2..] {
            assert_eq!(rec.executed.len(), 2);
            assert!(!rec.executed.contains(&SublayerRef::ffn(0)));
        }
    }

    #[test]
    fn online_metrics_report_the_settled_state() {
        let m = model(9);
        let plan = skip_pair_plan(1, Some(-1.0));
        let options = RunOptions {
            online: OnlineMode::PlannedWindow,
            online_window: 2,
            timing: false,
        };
        let (metrics, _) = run_task(&m, &plan, &task("t", "window", 6), &options).unwrap();
        // Settled set: attn@1, ffn@1 offline plus ffn@0, ffn@2 extended.
        assert_eq!(metrics.sublayers_per_tok, 2.0);
        // A window shorter than the run is required for settling.
        let (unsettled, _) =
            run_task(&m, &plan, &task("t", "window", 2), &options).unwrap();
        assert_eq!(unsettled.sublayers_per_tok, 4.0);
    }

    #[test]
    fn full_window_executes_every_ffn_then_extends() {
        let m = model(9);
        let plan = skip_pair_plan(1, Some(-1.0));
        let options = RunOptions {
            online: OnlineMode::FullWindow,
            online_window: 2,
            timing: false,
        };
        let prompt = encode_prompt("window");
        let mut driver = PlanDriver::new(&plan, m.config(), &options).unwrap();
        generate(&m, &prompt, 6, &mut driver).unwrap();
        let decode: Vec<&TokenRecord> = driver
            .records()
            .iter()
            .filter(|r| r.phase == Phase::Decode)
            .collect();
        // Window forwards: attention plan applies (attn@1 skipped), all 3
        // FFNs run, so 5 executions.
        assert_eq!(decode[0].executed.len(), 5);
        assert!(decode[0].executed.contains(&SublayerRef::ffn(1)));
        // ffn@1 is offline-skipped: measured in the window, never listed
        // as extra, still skipped afterwards.
        let outcome = driver.online_outcome().unwrap();
        assert!(outcome
            .extra
            .iter()
            .all(|s| s.sublayer() != SublayerRef::ffn(1)));
        for rec in &decode[2..] {
            assert_eq!(rec.executed.len(), 2);
        }
    }

    #[test]
    fn baselines_never_extend_online() {
        let m = model(9);
        // No beta: mode is forced off, window settings are irrelevant.
        let plan = SkipPlan {
            strategy: Strategy::EarlySkip,
            ..skip_pair_plan(1, None)
        };
        let options = RunOptions {
            online: OnlineMode::PlannedWindow,
            online_window: 1,
            timing: false,
        };
        let prompt = encode_prompt("window");
        let mut driver = PlanDriver::new(&plan, m.config(), &options).unwrap();
        generate(&m, &prompt, 4, &mut driver).unwrap();
        assert!(driver.online_outcome().is_none());
        assert_eq!(driver.final_active(), plan.skip_set());
    }

    #[test]
    fn run_tasks_reports_per_plan_identity_and_aggregates() {
        let m = model(5);
        let plan = skip_pair_plan(2, None);
        let suite = vec![task("a", "first", 3), task("b", "second", 5)];
        let report = run_tasks(&m, &plan, &suite, &no_timing()).unwrap();
        assert_eq!(report.strategy, "adaskip");
        assert_eq!(report.target_2m, 2);
        assert_eq!(report.plan_digest, Some(plan.digest()));
        assert_eq!(report.model_id, m.weights.content_digest());
        assert_eq!(report.tasks.len(), 2);
        assert_eq!(report.aggregates.sublayers_per_tok, 4.0);
        let mean = (report.tasks[0].flop_ratio + report.tasks[1].flop_ratio) / 2.0;
        assert!((report.aggregates.flop_ratio - mean).abs() < 1e-15);

        // A failing task names itself.
        let bad = vec![task("huge", "x", 1000)];
        match run_tasks(&m, &plan, &bad, &no_timing()).unwrap_err() {
            Error::TaskFailed { id, .. } => assert_eq!(id, "huge"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn untimed_runs_are_fully_deterministic() {
        let m = model(5);
        let plan = skip_pair_plan(0, None);
        let t = task("t", "same", 4);
        let (a, _) = run_task(&m, &plan, &t, &no_timing()).unwrap();
        let (b, _) = run_task(&m, &plan, &t, &no_timing()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_suite_aggregates_to_zero() {
        let m = model(5);
        let report = run_tasks(&m, &empty_plan(), &[], &no_timing()).unwrap();
        assert!(report.tasks.is_empty());
        assert_eq!(report.aggregates.sublayers_per_tok, 0.0);
        assert_eq!(report.aggregates.flop_ratio, 0.0);
        assert_eq!(report.aggregates.ttft_s, None);
    }
}
