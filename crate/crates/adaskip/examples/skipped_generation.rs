//! Execute a skip plan: each skipped sublayer is replaced by a scaled copy
//! of its input, and the report shows what that costs in output fidelity.
//!
//! ```bash
//! cargo run --example skipped_generation
//! ```

use adaskip::bench::{divergence, run_task, RunOptions, Task};
use adaskip::model::{
    decode_bytes, encode_prompt, generate, init_model, plant_identity_sublayers,
    FixedPlanDriver, Model, ModelConfig, SublayerRef, VOCAB_SIZE,
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
    // Two sublayers are overwritten with exact passthroughs, standing in
    // for the heavily redundant blocks of a real network.
    let mut weights = init_model(&config, 42)?;
    plant_identity_sublayers(&mut weights, &[SublayerRef::ffn(2), SublayerRef::attn(5)])?;
    let model = Model::new(weights);

    let calibration: Vec<Task> = ["old habits die hard", "no news is good news"]
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
    println!(
        "plan skips [{}]",
        plan.skipped
            .iter()
            .map(|s| format!("{} x{:.4}", s.sublayer(), s.scale))
            .collect::<Vec<_>>()
            .join(", ")
    );

    let task = Task {
        id: "demo".to_string(),
        prompt: "better late than never".to_string(),
        max_new_tokens: 20,
    };
    let (metrics, skipped_out) = run_task(&model, &plan, &task, &RunOptions::default())?;
    let full_out = generate(
        &model,
        &encode_prompt(&task.prompt),
        task.max_new_tokens,
        &mut FixedPlanDriver::full(),
    )?;

    println!(
        "full:    {:?}",
        String::from_utf8_lossy(&decode_bytes(&full_out.tokens)?)
    );
    println!(
        "skipped: {:?}",
        String::from_utf8_lossy(&decode_bytes(&skipped_out.tokens)?)
    );
    let d = divergence(&full_out.logits, &skipped_out.logits)?;
    println!(
        "top-1 agreement {:.3}, mean logit cosine {:.6}",
        d.top1_agreement, d.mean_logit_cosine
    );
    println!(
        "sublayers per decode token {:.1} of {}, flop ratio {:.4}",
        metrics.sublayers_per_tok,
        2 * config.n_layers,
        metrics.flop_ratio
    );
    if let (Some(ttft), Some(per_tok)) = (metrics.ttft_s, metrics.decode_s_per_tok) {
        println!("ttft {:.6}s, decode {:.6}s per token (median of 3)", ttft, per_tok);
    }
    Ok(())
}
