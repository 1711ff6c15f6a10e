//! The decode-time extension: watch a short window of FFN executions, then
//! additionally skip any FFN whose live similarity clears the offline
//! plan's threshold.
//!
//! ```bash
//! cargo run --example online_ffn_extension
//! ```

use adaskip::bench::{OnlineMode, PlanDriver, RunOptions, Task};
use adaskip::model::{
    encode_prompt, generate, init_model, plant_identity_sublayers, Model, ModelConfig,
    SublayerRef, VOCAB_SIZE,
};
use adaskip::policy::{build_offline_plan, PlanOptions, PlanSize};
use adaskip::profiler::{profile_tasks, ProfileRequest};

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
    // Three passthroughs rank on top, so the fourth offline skip is a live
    // sublayer and beta sits below 1: a redundant FFN can still clear it.
    let mut weights = init_model(&config, 10)?;
    plant_identity_sublayers(
        &mut weights,
        &[SublayerRef::attn(1), SublayerRef::ffn(2), SublayerRef::attn(6)],
    )?;
    let model = Model::new(weights);
    let calibration: Vec<Task> = ["seeing is believing", "easy come easy go"]
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

    let plan = build_offline_plan(&profile, PlanSize::TargetSublayers(4), PlanOptions::default())?;
    let beta = plan.beta.expect("non-empty plan");
    println!(
        "offline plan skips [{}]; extension threshold beta {beta:.6}",
        plan.skipped
            .iter()
            .map(|s| s.sublayer().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );

    // The driver resolves the offline plan during the window, then flips
    // to the extended set for the rest of the generation.
    let options = RunOptions {
        online: OnlineMode::PlannedWindow,
        online_window: 6,
        timing: false,
    };
    let prompt = encode_prompt("a watched pot never boils");
    let mut driver = PlanDriver::new(&plan, model.config(), &options)?;
    generate(&model, &prompt, 16, &mut driver)?;

    match driver.online_outcome() {
        Some(outcome) if outcome.extra.is_empty() => {
            println!("window closed; no live FFN cleared beta, plan unchanged");
        }
        Some(outcome) => {
            for extra in &outcome.extra {
                println!(
                    "window mean similarity of {} beat beta; now skipped with scale {:.4}",
                    extra.sublayer(),
                    extra.scale
                );
            }
            println!(
                "extended set: [{}]",
                outcome
                    .skipped_p
                    .iter()
                    .map(|s| s.sublayer().to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        None => println!("generation too short for the window; offline plan used throughout"),
    }

    // Steady-state decode records confirm the active set after the window.
    let last = driver.records().last().expect("decode ran");
    println!(
        "last decode token executed {} of {} sublayers",
        last.executed.len(),
        2 * config.n_layers
    );
    Ok(())
}
