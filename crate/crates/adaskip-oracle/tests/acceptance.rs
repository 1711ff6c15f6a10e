//! End-to-end acceptance suite on a desk-scale reference model: 8 blocks,
//! 64 dimensions, 4 heads, seeded at 42, with four exactly-identity
//! sublayers planted at attn@1, ffn@2, ffn@5, and attn@6. Each criterion
//! is one test; tolerances are pinned inline, and anything bit-exact is
//! asserted with plain equality.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use adaskip::bench::{
    compare_strategies, divergence, emit_comparison, emit_run_report, hit_rate, load_comparison,
    load_run_report, run_task, run_tasks, top_k, CompareOptions, CompareStrategy, KindFilter,
    OnlineMode, PlanDriver, RunOptions, Task,
};
use adaskip::model::{
    encode_prompt, generate, init_model, load_weights, plant_identity_sublayers, prefill,
    save_weights, FixedPlanDriver, GenerateDriver, KvCache, Model, ModelConfig, Phase,
    PlanResolution, SublayerIo, SublayerKind, SublayerRef, VOCAB_SIZE,
};
use adaskip::policy::{
    baseline_plan, build_offline_plan, load_plan, save_plan, skip_count, theoretical_speedup,
    OnlineState, PlanOptions, PlanSize, PlannedSkip, SkipPlan, Strategy,
};
use adaskip::profiler::{
    load_profile, merge_profiles, profile_tasks, save_profile, ProfileCollector, ProfileRequest,
    ProfileEntry, SimilarityProfile,
};
use adaskip::tensor::cosine_similarity;
use adaskip::Error;
use adaskip_oracle::{
    adaptive_skip_set, decode_attention_flops, ffn_flops, mean, min_similarity, naive_cosine,
    naive_norm_ratio, prefill_attention_flops, set_hit_rate, topk_by_similarity,
};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const SEED: u64 = 42;
const N_LAYERS: usize = 8;
const N_SUBLAYERS: usize = 2 * N_LAYERS;

fn desk_config() -> ModelConfig {
    ModelConfig {
        n_layers: N_LAYERS,
        d_model: 64,
        n_heads: 4,
        ffn_dim: 256,
        vocab_size: VOCAB_SIZE,
        max_seq_len: 2048,
        norm_eps: 1e-5,
    }
}

fn planted() -> [SublayerRef; 4] {
    [
        SublayerRef::attn(1),
        SublayerRef::ffn(2),
        SublayerRef::ffn(5),
        SublayerRef::attn(6),
    ]
}

fn task(id: &str, prompt: &str, max_new: usize) -> Task {
    Task {
        id: id.to_string(),
        prompt: prompt.to_string(),
        max_new_tokens: max_new,
    }
}

struct Fixture {
    model: Model,
    calibration: Vec<Task>,
    evaluation: Vec<Task>,
    /// Decode-phase profile over the calibration tasks.
    profile: SimilarityProfile,
    /// Decode-phase profile over the (held-out) evaluation prompts.
    holdout: SimilarityProfile,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let mut weights = init_model(&desk_config(), SEED).unwrap();
        plant_identity_sublayers(&mut weights, &planted()).unwrap();
        let model = Model::new(weights);
        let calibration = vec![
            task("cal-0", "the quick brown fox jumps over the lazy dog", 0),
            task("cal-1", "pack my box with five dozen liquor jugs", 0),
            task("cal-2", "how vexingly quick daft zebras jump", 0),
            task("cal-3", "sphinx of black quartz, judge my vow", 0),
            task("cal-4", "a stitch in time saves nine", 0),
            task("cal-5", "measure twice and cut once", 0),
        ];
        let evaluation = vec![
            task("eval-0", "time flies like an arrow", 14),
            task("eval-1", "fruit flies like a banana", 12),
            task("eval-2", "colorless green ideas sleep furiously", 16),
            task("eval-3", "to be or not to be, that is the question", 12),
            task("eval-4", "all that glitters is not gold", 14),
            task("eval-5", "the rain in spain stays mainly in the plain", 12),
        ];
        let profile = profile_tasks(&model, &calibration, 8, ProfileRequest::Decode)
            .unwrap()
            .decode
            .unwrap();
        let holdout = profile_tasks(&model, &evaluation, 8, ProfileRequest::Decode)
            .unwrap()
            .decode
            .unwrap();
        Fixture {
            model,
            calibration,
            evaluation,
            profile,
            holdout,
        }
    })
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

fn no_timing() -> RunOptions {
    RunOptions {
        timing: false,
        ..RunOptions::default()
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * 2.0f64.powi(-53)
}

fn signed(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * unit(rng) - 1.0
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| signed(rng)).collect()
}

#[test]
fn criterion_01_zero_skip_plan_is_bit_exact() {
    let f = fixture();
    let plan = empty_plan();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..20 {
        let len = 5 + (rng.next_u64() % 36) as usize;
        let prompt: String = (0..len)
            .map(|_| (b'a' + (rng.next_u64() % 27) as u8).min(b'z') as char)
            .collect();
        let max_new = (rng.next_u64() % 9) as usize;
        let t = task(&format!("r{i}"), &prompt, max_new);

        let (_, got) = run_task(&f.model, &plan, &t, &no_timing()).unwrap();
        let want = generate(
            &f.model,
            &encode_prompt(&prompt),
            max_new,
            &mut FixedPlanDriver::full(),
        )
        .unwrap();
        assert_eq!(got.tokens, want.tokens, "task {i}");
        assert_eq!(got.logits, want.logits, "task {i}");
    }
}

#[test]
fn criterion_02_similarity_kernel_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..1000 {
        let a = random_vec(&mut rng, 16);
        let b = random_vec(&mut rng, 16);
        let self_sim = cosine_similarity(&a, &a).unwrap();
        assert!((self_sim - 1.0).abs() < 1e-9);

        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let neg_sim = cosine_similarity(&a, &neg).unwrap();
        assert!((neg_sim + 1.0).abs() < 1e-9);

        let c = 0.001 + 999.0 * unit(&mut rng);
        let scaled: Vec<f64> = b.iter().map(|x| c * x).collect();
        let plain = cosine_similarity(&a, &b).unwrap();
        let invariant = cosine_similarity(&a, &scaled).unwrap();
        assert!((plain - invariant).abs() < 1e-9);
        assert!((plain - naive_cosine(&a, &b)).abs() < 1e-9);
    }
}

#[test]
fn criterion_03_speedup_table_arithmetic() {
    let round2 = |x: f64| (x * 100.0).round() / 100.0;

    // 8 of 64 sublayers on a 32-block model: speedup 1.14.
    assert_eq!(skip_count(32, 32.0 / 28.0).unwrap(), 4);
    assert_eq!(skip_count(32, 1.14).unwrap(), 4);
    assert_eq!(round2(theoretical_speedup(32, 4)), 1.14);

    // 16 of 64: speedup 1.33.
    assert_eq!(skip_count(32, 32.0 / 24.0).unwrap(), 8);
    assert_eq!(skip_count(32, 1.33).unwrap(), 8);
    assert_eq!(round2(theoretical_speedup(32, 8)), 1.33);
}

fn synthetic_profile(rng: &mut ChaCha8Rng, n_layers: usize, ties: bool) -> SimilarityProfile {
    let mut sublayers = Vec::new();
    for layer in 0..n_layers {
        for kind in [SublayerKind::Attention, SublayerKind::Ffn] {
            let mut sim = signed(rng);
            if ties {
                sim = (sim * 4.0).round() / 4.0;
            }
            sublayers.push(ProfileEntry {
                layer,
                kind,
                mean_similarity: sim,
                mean_scale: 0.5 + unit(rng),
                token_count: 10,
            });
        }
    }
    SimilarityProfile {
        model_id: "synthetic".to_string(),
        phase: Phase::Decode,
        task_count: 1,
        sublayers,
        source_task_ids: vec!["cal".to_string()],
    }
}

#[test]
fn criterion_04_offline_plans_match_the_sort_oracle_and_nest() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let alphas = [1.0, 1.1, 1.2, 1.33, 1.6, 2.0];
    for case in 0..1000 {
        let n_layers = 2 + (rng.next_u64() % 8) as usize;
        let p = synthetic_profile(&mut rng, n_layers, case % 2 == 0);

        let alpha = 1.0 + 1.5 * unit(&mut rng);
        let plan = build_offline_plan(&p, PlanSize::Alpha(alpha), PlanOptions::default()).unwrap();
        let want: BTreeSet<SublayerRef> = topk_by_similarity(&p, 2 * plan.m, None)
            .into_iter()
            .collect();
        assert_eq!(plan.skip_set(), want, "case {case}, alpha {alpha}");

        let mut previous: Option<BTreeSet<SublayerRef>> = None;
        for &a in &alphas {
            let set = build_offline_plan(&p, PlanSize::Alpha(a), PlanOptions::default())
                .unwrap()
                .skip_set();
            if let Some(prev) = &previous {
                assert!(
                    prev.is_subset(&set),
                    "case {case}: alpha {a} dropped sublayers"
                );
            }
            previous = Some(set);
        }
    }
}

#[test]
fn criterion_05_profiles_pinpoint_planted_sublayers() {
    let f = fixture();
    let expected: BTreeSet<SublayerRef> = planted().into_iter().collect();

    // Planted sublayers profile above every live one, with a real margin.
    let planted_floor = expected
        .iter()
        .map(|s| f.profile.entry(*s).unwrap().mean_similarity)
        .fold(f64::INFINITY, f64::min);
    let live_ceiling = f
        .profile
        .sublayers
        .iter()
        .filter(|e| !expected.contains(&e.sublayer()))
        .map(|e| e.mean_similarity)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(planted_floor > 1.0 - 1e-9, "{planted_floor}");
    assert!(live_ceiling < planted_floor, "{live_ceiling}");

    // Calibration picks them; the held-out profile confirms them.
    let predicted = top_k(&f.profile, 4, KindFilter::Both).unwrap();
    assert_eq!(predicted, expected);
    assert_eq!(top_k(&f.holdout, 4, KindFilter::Both).unwrap(), expected);
    assert_eq!(hit_rate(&predicted, &f.holdout, 4, KindFilter::Both).unwrap(), 1.0);
    assert_eq!(set_hit_rate(&predicted, &f.holdout, 4, None), 1.0);
}

#[test]
fn criterion_06_skipping_identity_ffns_is_lossless() {
    let f = fixture();
    let skipped: Vec<PlannedSkip> = [SublayerRef::ffn(2), SublayerRef::ffn(5)]
        .into_iter()
        .map(|s| {
            let e = f.profile.entry(s).unwrap();
            assert!(
                (e.mean_scale - 1.0).abs() <= 1e-9,
                "{s}: profiled scale {}",
                e.mean_scale
            );
            PlannedSkip {
                layer: s.layer,
                kind: s.kind,
                scale: e.mean_scale,
            }
        })
        .collect();
    let plan = SkipPlan {
        strategy: Strategy::Adaskip,
        alpha: theoretical_speedup(N_LAYERS, 1),
        m: 1,
        skipped,
        protect_first: false,
        protect_last: false,
        beta: None,
        source_profile_digest: Some(f.profile.digest()),
    };
    plan.validate_for_model(N_LAYERS).unwrap();

    for t in &f.evaluation {
        let (_, got) = run_task(&f.model, &plan, t, &no_timing()).unwrap();
        let want = generate(
            &f.model,
            &encode_prompt(&t.prompt),
            t.max_new_tokens,
            &mut FixedPlanDriver::full(),
        )
        .unwrap();
        assert_eq!(got.logits, want.logits, "task {}", t.id);
        let d = divergence(&want.logits, &got.logits).unwrap();
        assert_eq!(d.top1_agreement, 1.0);
        assert_eq!(d.mean_logit_cosine, 1.0);
    }
}

/// Driver for the online end-to-end replication: applies fixed scales and
/// records the IO of everything that executes.
struct SkippingRecorder {
    scales: BTreeMap<SublayerRef, f64>,
    records: Vec<SublayerIo>,
}

impl GenerateDriver for SkippingRecorder {
    fn resolve(
        &mut self,
        sublayer: SublayerRef,
        _phase: Phase,
        _position: usize,
    ) -> adaskip::Result<PlanResolution> {
        Ok(match self.scales.get(&sublayer) {
            Some(&scale) => PlanResolution::Skip { scale },
            None => PlanResolution::Execute,
        })
    }

    fn observe(&mut self, io: &SublayerIo) -> adaskip::Result<()> {
        self.records.push(io.clone());
        Ok(())
    }
}

#[test]
fn criterion_07_online_extension_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for case in 0..500 {
        let n_layers = 2 + (rng.next_u64() % 7) as usize;
        // Random even-sized offline skip set over all sublayers.
        let mut chosen: Vec<SublayerRef> = (0..n_layers)
            .flat_map(|l| [SublayerRef::attn(l), SublayerRef::ffn(l)])
            .filter(|_| rng.next_u64() % 3 == 0)
            .collect();
        if chosen.len() % 2 == 1 {
            chosen.pop();
        }
        let plan = SkipPlan {
            strategy: Strategy::Adaskip,
            alpha: 1.5,
            m: chosen.len() / 2,
            skipped: chosen
                .iter()
                .map(|s| PlannedSkip {
                    layer: s.layer,
                    kind: s.kind,
                    scale: 1.0,
                })
                .collect(),
            protect_first: false,
            protect_last: false,
            beta: None,
            source_profile_digest: None,
        };
        plan.validate().unwrap();
        let offline = plan.skip_set();

        // Every fifth case pins beta to the ceiling: nothing can strictly
        // exceed it, so the extension must be empty.
        let beta = if case % 5 == 0 { 1.0 } else { signed(&mut rng) / 2.0 };
        let window = 1 + (rng.next_u64() % 3) as usize;
        let candidates: BTreeSet<SublayerRef> = (0..n_layers)
            .map(SublayerRef::ffn)
            .filter(|s| !offline.contains(s))
            .collect();

        let mut state = OnlineState::new(window, beta, candidates.clone()).unwrap();
        let mut observed: BTreeMap<SublayerRef, Vec<SublayerIo>> = BTreeMap::new();
        for position in 0..window {
            for &c in &candidates {
                let io = SublayerIo {
                    sublayer: c,
                    phase: Phase::Decode,
                    position,
                    input: random_vec(&mut rng, 6),
                    output: random_vec(&mut rng, 6),
                };
                state.observe(&io).unwrap();
                observed.entry(c).or_default().push(io);
            }
        }
        let outcome = state.finalize(&plan).unwrap();

        let skipped_p: BTreeSet<SublayerRef> =
            outcome.skipped_p.iter().map(PlannedSkip::sublayer).collect();
        assert!(offline.is_subset(&skipped_p), "case {case}");
        for extra in &outcome.extra {
            assert_eq!(extra.kind, SublayerKind::Ffn, "case {case}");
            assert!(!offline.contains(&extra.sublayer()), "case {case}");
        }

        // Brute-force replication from the raw observations.
        let window_means: BTreeMap<SublayerRef, f64> = observed
            .iter()
            .map(|(&c, ios)| {
                let sims: Vec<f64> = ios
                    .iter()
                    .map(|io| naive_cosine(&io.input, &io.output))
                    .collect();
                (c, mean(&sims))
            })
            .collect();
        let want = adaptive_skip_set(&offline, beta, &window_means);
        assert_eq!(skipped_p, want, "case {case}");
        if case % 5 == 0 {
            assert!(outcome.extra.is_empty(), "case {case}");
            assert_eq!(outcome.skipped_p, plan.skipped, "case {case}");
        }

        // Offline members keep their plan scales; extras carry the
        // window's mean norm ratio.
        for s in &outcome.skipped_p {
            if offline.contains(&s.sublayer()) {
                assert_eq!(s.scale, 1.0, "case {case}");
            } else {
                let ratios: Vec<f64> = observed[&s.sublayer()]
                    .iter()
                    .map(|io| naive_norm_ratio(&io.input, &io.output))
                    .collect();
                assert!((s.scale - mean(&ratios)).abs() < 1e-12, "case {case}");
            }
        }
    }

    // End to end: the runner's window decision must equal the brute-force
    // filter over the same decode IO, and beta must be the profile minimum
    // over the offline set.
    let f = fixture();
    let plan =
        build_offline_plan(&f.profile, PlanSize::TargetSublayers(2), PlanOptions::default())
            .unwrap();
    let beta = plan.beta.expect("non-empty plan has a threshold");
    assert_eq!(beta, min_similarity(&f.profile, &plan.skip_set()));

    let window = 4;
    let max_new = 10;
    let options = RunOptions {
        online: OnlineMode::PlannedWindow,
        online_window: window,
        timing: false,
    };
    let prompt = encode_prompt(&f.evaluation[0].prompt);
    let mut driver = PlanDriver::new(&plan, f.model.config(), &options).unwrap();
    generate(&f.model, &prompt, max_new, &mut driver).unwrap();
    let outcome = driver.online_outcome().expect("window closed").clone();

    let mut replica = SkippingRecorder {
        scales: plan.scale_map(),
        records: Vec::new(),
    };
    generate(&f.model, &prompt, max_new, &mut replica).unwrap();
    let window_means: BTreeMap<SublayerRef, f64> = (0..N_LAYERS)
        .map(SublayerRef::ffn)
        .filter(|s| !plan.skip_set().contains(s))
        .map(|s| {
            let sims: Vec<f64> = replica
                .records
                .iter()
                .filter(|io| {
                    io.sublayer == s
                        && io.phase == Phase::Decode
                        && io.position < prompt.len() + window
                })
                .map(|io| naive_cosine(&io.input, &io.output))
                .collect();
            assert_eq!(sims.len(), window);
            (s, mean(&sims))
        })
        .collect();
    let got: BTreeSet<SublayerRef> =
        outcome.skipped_p.iter().map(PlannedSkip::sublayer).collect();
    assert_eq!(got, adaptive_skip_set(&plan.skip_set(), beta, &window_means));
}

#[test]
fn criterion_08_execution_accounting_is_exact() {
    let f = fixture();
    let cfg = f.model.config();
    let (d, ffn_dim) = (cfg.d_model, cfg.ffn_dim);
    let plans = vec![
        empty_plan(),
        build_offline_plan(&f.profile, PlanSize::TargetSublayers(4), PlanOptions::default())
            .unwrap(),
        baseline_plan(Strategy::EarlySkip, N_LAYERS, PlanSize::TargetSublayers(4)).unwrap(),
        baseline_plan(Strategy::Periodic, N_LAYERS, PlanSize::TargetSublayers(4)).unwrap(),
        baseline_plan(Strategy::EarlyExit, N_LAYERS, PlanSize::TargetSublayers(4)).unwrap(),
    ];
    let all: Vec<SublayerRef> = (0..N_LAYERS)
        .flat_map(|l| [SublayerRef::attn(l), SublayerRef::ffn(l)])
        .collect();

    for plan in &plans {
        for t in &f.evaluation[..3] {
            let (metrics, _) = run_task(&f.model, plan, t, &no_timing()).unwrap();

            // Replicate the run to count executions by hand. The window
            // (20) exceeds every decode length here, so the offline set is
            // the active set throughout.
            let prompt = encode_prompt(&t.prompt);
            let mut driver = PlanDriver::new(plan, cfg, &no_timing()).unwrap();
            generate(&f.model, &prompt, t.max_new_tokens, &mut driver).unwrap();
            assert!(driver.online_outcome().is_none());

            let expected_per_token = N_SUBLAYERS - plan.skipped.len();
            let mut executed = 0.0;
            let mut full = 0.0;
            for rec in driver.records() {
                match rec.phase {
                    Phase::Prefill => {}
                    Phase::Decode => {
                        assert_eq!(
                            rec.executed.len(),
                            expected_per_token,
                            "{} on {}",
                            plan.strategy,
                            t.id
                        );
                    }
                }
                for s in &all {
                    let cost = match (rec.phase, s.kind) {
                        // Whole-prefill formulas are charged once, at the
                        // first prefill record, for the full prompt span.
                        (Phase::Prefill, SublayerKind::Attention) => {
                            if rec.position == 0 {
                                prefill_attention_flops(d, prompt.len())
                            } else {
                                0.0
                            }
                        }
                        (Phase::Prefill, SublayerKind::Ffn) => {
                            if rec.position == 0 {
                                ffn_flops(d, ffn_dim, prompt.len())
                            } else {
                                0.0
                            }
                        }
                        (Phase::Decode, SublayerKind::Attention) => {
                            decode_attention_flops(d, rec.position + 1)
                        }
                        (Phase::Decode, SublayerKind::Ffn) => ffn_flops(d, ffn_dim, 1),
                    };
                    full += cost;
                    if rec.executed.contains(s) {
                        executed += cost;
                    }
                }
            }
            let want = executed / full;
            let rel = (metrics.flop_ratio - want).abs() / want;
            assert!(rel < 1e-6, "{} on {}: {} vs {want}", plan.strategy, t.id, metrics.flop_ratio);
            assert_eq!(metrics.sublayers_per_tok, expected_per_token as f64);
        }
    }
}

#[test]
fn criterion_09_skipped_attention_saves_kv_exactly() {
    let f = fixture();
    let cfg = f.model.config();
    let plan =
        build_offline_plan(&f.profile, PlanSize::TargetSublayers(4), PlanOptions::default())
            .unwrap();
    let skipped_attn: Vec<usize> = plan
        .skipped
        .iter()
        .filter(|s| s.kind == SublayerKind::Attention)
        .map(|s| s.layer)
        .collect();
    assert_eq!(skipped_attn, vec![1, 6]);
    let k = skipped_attn.len();

    let prompt = encode_prompt("count the cache entries for this prompt");
    let mut kv = KvCache::new(cfg.n_layers, cfg.d_model);
    let mut driver = FixedPlanDriver::new(plan.scale_map());
    prefill(&f.model, &prompt, &mut kv, &mut driver).unwrap();

    let mut total = 0;
    for layer in 0..N_LAYERS {
        let want = if skipped_attn.contains(&layer) {
            0
        } else {
            prompt.len()
        };
        assert_eq!(kv.filled(layer), want, "layer {layer}");
        total += kv.filled(layer);
    }
    assert_eq!(total, (N_LAYERS - k) * prompt.len());
    assert_eq!(total * N_LAYERS, (N_LAYERS - k) * N_LAYERS * prompt.len());

    // Decoding with those sublayers re-enabled would attend over a gap.
    let err = f
        .model
        .forward_token(65, &mut kv, Phase::Decode, &mut FixedPlanDriver::full())
        .unwrap_err();
    match err {
        Error::InconsistentPlan {
            sublayer,
            position,
            filled,
        } => {
            assert_eq!(sublayer, SublayerRef::attn(1));
            assert_eq!(position, prompt.len());
            assert_eq!(filled, 0);
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn criterion_10_ranked_skipping_beats_positional_baselines() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let options = CompareOptions {
        timing: false,
        ..CompareOptions::default()
    };
    let report = compare_strategies(
        &f.model,
        &f.profile,
        &f.evaluation,
        &[4],
        &CompareStrategy::parse_list("all").unwrap(),
        dir.path(),
        &options,
    )
    .unwrap();
    assert!(report.cell_errors.is_empty(), "{:?}", report.cell_errors);
    assert_eq!(report.rows.len(), 5 * f.evaluation.len());

    let rows = |name: &str| -> Vec<_> {
        report.rows.iter().filter(|r| r.strategy == name).collect()
    };
    for r in rows("full") {
        assert_eq!(r.top1_agreement, 1.0);
        assert_eq!(r.logit_cosine, 1.0);
        assert_eq!(r.flop_ratio, 1.0);
    }
    // Ranked skipping lands exactly on the planted identity sublayers.
    for r in rows("adaskip") {
        assert_eq!(r.top1_agreement, 1.0, "task {}", r.task_id);
        assert!(r.logit_cosine >= 1.0 - 1e-9, "task {}", r.task_id);
        assert!(r.flop_ratio < 1.0);
    }
    // Position-based skipping hits live sublayers and degrades output.
    for baseline in ["early_skip", "periodic", "early_exit"] {
        let agreements: Vec<f64> = rows(baseline).iter().map(|r| r.top1_agreement).collect();
        assert_eq!(agreements.len(), f.evaluation.len());
        let mean_agreement = mean(&agreements);
        assert!(mean_agreement < 1.0, "{baseline}: {mean_agreement}");
    }

    // The baselines skip the documented positions.
    let layers = |name: &str| {
        let plan = load_plan(&dir.path().join("plans").join(format!("{name}_4.json"))).unwrap();
        let layers: BTreeSet<usize> = plan.skipped.iter().map(|s| s.layer).collect();
        layers
    };
    assert_eq!(layers("early_skip"), BTreeSet::from([1, 2]));
    assert_eq!(layers("periodic"), BTreeSet::from([1, 4]));
    assert_eq!(layers("early_exit"), BTreeSet::from([6, 7]));
}

#[test]
fn criterion_11_profile_pooling_is_exact() {
    let f = fixture();
    for request in [ProfileRequest::Prefill, ProfileRequest::Decode] {
        let pick = |bundle: adaskip::profiler::ProfileBundle| match request {
            ProfileRequest::Prefill => bundle.prefill.unwrap(),
            _ => bundle.decode.unwrap(),
        };
        let shards: Vec<SimilarityProfile> = f
            .calibration
            .iter()
            .map(|t| {
                pick(profile_tasks(&f.model, std::slice::from_ref(t), 8, request).unwrap())
            })
            .collect();
        let merged = merge_profiles(&shards).unwrap();
        let union = pick(profile_tasks(&f.model, &f.calibration, 8, request).unwrap());
        assert_eq!(merged.task_count, union.task_count);
        assert_eq!(merged.source_task_ids, union.source_task_ids);
        for (m, u) in merged.sublayers.iter().zip(&union.sublayers) {
            assert_eq!(m.token_count, u.token_count);
            assert!((m.mean_similarity - u.mean_similarity).abs() < 1e-12);
            assert!((m.mean_scale - u.mean_scale).abs() < 1e-12);
        }
    }

    // Observation never perturbs generation.
    let prompt = encode_prompt(&f.calibration[0].prompt);
    let plain = generate(&f.model, &prompt, 9, &mut FixedPlanDriver::full()).unwrap();
    let mut collector = ProfileCollector::new();
    let observed = generate(&f.model, &prompt, 9, &mut collector).unwrap();
    assert_eq!(plain.tokens, observed.tokens);
    assert_eq!(plain.logits, observed.logits);
}

#[test]
fn criterion_12_formats_round_trip_byte_identically() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let reload = |a: &std::path::Path, b: &std::path::Path| {
        assert_ne!(std::fs::read(a).unwrap().len(), 0);
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    };

    let w1 = dir.path().join("model.bin");
    let w2 = dir.path().join("model2.bin");
    save_weights(&w1, &f.model.weights).unwrap();
    let loaded = load_weights(&w1, f.model.config()).unwrap();
    assert_eq!(loaded, f.model.weights);
    save_weights(&w2, &loaded).unwrap();
    reload(&w1, &w2);

    let p1 = dir.path().join("profile.json");
    let p2 = dir.path().join("profile2.json");
    save_profile(&p1, &f.profile).unwrap();
    save_profile(&p2, &load_profile(&p1).unwrap()).unwrap();
    reload(&p1, &p2);

    let plan =
        build_offline_plan(&f.profile, PlanSize::TargetSublayers(4), PlanOptions::default())
            .unwrap();
    let s1 = dir.path().join("plan.json");
    let s2 = dir.path().join("plan2.json");
    save_plan(&s1, &plan).unwrap();
    save_plan(&s2, &load_plan(&s1).unwrap()).unwrap();
    reload(&s1, &s2);

    let report = run_tasks(
        &f.model,
        &plan,
        &f.evaluation[..2],
        &RunOptions::default(),
    )
    .unwrap();
    let r1 = dir.path().join("run.json");
    let r2 = dir.path().join("run2.json");
    emit_run_report(&r1, &report).unwrap();
    emit_run_report(&r2, &load_run_report(&r1).unwrap()).unwrap();
    reload(&r1, &r2);

    let grid = compare_strategies(
        &f.model,
        &f.profile,
        &f.evaluation[..2],
        &[4],
        &[CompareStrategy::Full, CompareStrategy::Skip(Strategy::Adaskip)],
        &dir.path().join("cmp1"),
        &CompareOptions {
            timing: false,
            ..CompareOptions::default()
        },
    )
    .unwrap();
    emit_comparison(
        &dir.path().join("cmp2"),
        &load_comparison(&dir.path().join("cmp1").join("comparison.json")).unwrap(),
    )
    .unwrap();
    reload(
        &dir.path().join("cmp1").join("comparison.json"),
        &dir.path().join("cmp2").join("comparison.json"),
    );
    reload(
        &dir.path().join("cmp1").join("comparison.csv"),
        &dir.path().join("cmp2").join("comparison.csv"),
    );
    assert!(!grid.rows.is_empty());
}
