//! From profile to plan: pick a target speedup, skip the most redundant
//! sublayers, and save the result for later runs.
//!
//! ```bash
//! cargo run --example build_skip_plan
//! ```

use adaskip::model::{init_model, Model, ModelConfig, VOCAB_SIZE};
use adaskip::policy::{build_offline_plan, load_plan, save_plan, PlanOptions, PlanSize};
use adaskip::profiler::{profile_tasks, ProfileRequest};
use adaskip::bench::Task;

fn main() -> adaskip::Result<()> {
    let config = ModelConfig {
        n_layers: 8,
        d_model: 64,
        n_heads: 4,
        ffn_dim: 256,
        vocab_size: VOCAB_SIZE,
        max_seq_len: 512,
        norm_eps: 1e-5,
    };
    let model = Model::new(init_model(&config, 7)?);
    let calibration: Vec<Task> = [
        "a journey of a thousand miles",
        "fortune favors the bold",
        "practice makes perfect",
    ]
    .iter()
    .enumerate()
    .map(|(i, p)| Task {
        id: format!("cal-{i}"),
        prompt: p.to_string(),
        max_new_tokens: 0,
    })
    .collect();
    let profile = profile_tasks(&model, &calibration, 12, ProfileRequest::Decode)?
        .decode
        .expect("requested");

    // Alpha is the target acceleration: skip enough sublayer pairs that
    // the remaining depth is 1/alpha of the original. Larger alpha strictly
    // grows the skip set, so plans nest.
    for alpha in [1.1, 1.33, 2.0] {
        let plan = build_offline_plan(&profile, PlanSize::Alpha(alpha), PlanOptions::default())?;
        let names: Vec<String> = plan.skipped.iter().map(|s| s.sublayer().to_string()).collect();
        println!(
            "alpha {alpha:<4} -> skip 2m={} [{}], beta {:.6}",
            plan.skipped.len(),
            names.join(", "),
            plan.beta.expect("non-empty plan"),
        );
    }

    // An exact budget works too, and the first/last block can be fenced
    // off when the embedding boundary should stay untouched.
    let guarded = build_offline_plan(
        &profile,
        PlanSize::TargetSublayers(6),
        PlanOptions {
            protect_first: true,
            protect_last: true,
        },
    )?;
    assert!(guarded
        .skipped
        .iter()
        .all(|s| s.layer != 0 && s.layer != config.n_layers - 1));
    println!(
        "protected plan skips [{}]",
        guarded
            .skipped
            .iter()
            .map(|s| s.sublayer().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );

    let dir = std::env::temp_dir().join("adaskip_plan_example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("plan.json");
    save_plan(&path, &guarded)?;
    let reloaded = load_plan(&path)?;
    assert_eq!(reloaded, guarded);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
