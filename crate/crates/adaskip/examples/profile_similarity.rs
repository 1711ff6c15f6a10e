//! Offline profiling: run calibration prompts through the full model and
//! rank sublayers by how little they change the residual stream.
//!
//! ```bash
//! cargo run --example profile_similarity
//! ```

use adaskip::model::{init_model, Model, ModelConfig, VOCAB_SIZE};
use adaskip::policy::ranked_sublayers;
use adaskip::profiler::{profile_tasks, ProfileRequest};
use adaskip::bench::Task;

fn task(id: &str, prompt: &str) -> Task {
    Task {
        id: id.to_string(),
        prompt: prompt.to_string(),
        max_new_tokens: 0,
    }
}

fn main() -> adaskip::Result<()> {
    let config = ModelConfig {
        n_layers: 6,
        d_model: 64,
        n_heads: 4,
        ffn_dim: 256,
        vocab_size: VOCAB_SIZE,
        max_seq_len: 512,
        norm_eps: 1e-5,
    };
    let model = Model::new(init_model(&config, 42)?);
    let calibration = vec![
        task("cal-0", "pack my box with five dozen liquor jugs"),
        task("cal-1", "how vexingly quick daft zebras jump"),
        task("cal-2", "sphinx of black quartz, judge my vow"),
    ];

    // Measure both phases; each decode run observes 16 tokens per task.
    let bundle = profile_tasks(&model, &calibration, 16, ProfileRequest::Both)?;
    let decode = bundle.decode.expect("requested");
    let prefill = bundle.prefill.expect("requested");
    println!(
        "profiled {} tasks, {} decode tokens per sublayer\n",
        decode.task_count, decode.sublayers[0].token_count
    );

    // High mean similarity means the sublayer barely rotates its input;
    // mean scale is the norm ratio a skip must compensate with.
    println!("decode phase, most skippable first:");
    println!("{:<10} {:>16} {:>12}", "sublayer", "mean similarity", "mean scale");
    for entry in ranked_sublayers(&decode) {
        println!(
            "{:<10} {:>16.6} {:>12.6}",
            entry.sublayer().to_string(),
            entry.mean_similarity,
            entry.mean_scale
        );
    }

    let corr: Vec<(String, f64, f64)> = decode
        .sublayers
        .iter()
        .zip(&prefill.sublayers)
        .map(|(d, p)| (d.sublayer().to_string(), d.mean_similarity, p.mean_similarity))
        .collect();
    println!("\ndecode vs prefill similarity per sublayer:");
    for (name, d, p) in corr {
        println!("{name:<10} decode {d:.4}  prefill {p:.4}");
    }
    Ok(())
}
