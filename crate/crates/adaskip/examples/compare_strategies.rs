//! The benchmark grid: every strategy at every skip budget against the
//! full model, with divergence measured token by token.
//!
//! ```bash
//! cargo run --example compare_strategies
//! ```

use adaskip::bench::{compare_strategies, CompareOptions, CompareStrategy, Task};
use adaskip::model::{init_model, plant_identity_sublayers, Model, ModelConfig, SublayerRef, VOCAB_SIZE};
use adaskip::profiler::{profile_tasks, ProfileRequest};

fn tasks(prefix: &str, prompts: &[&str], max_new: usize) -> Vec<Task> {
    prompts
        .iter()
        .enumerate()
        .map(|(i, p)| Task {
            id: format!("{prefix}-{i}"),
            prompt: p.to_string(),
            max_new_tokens: max_new,
        })
        .collect()
}

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
    let mut weights = init_model(&config, 42)?;
    // Plant exact passthroughs so ranked skipping has something real to find.
    plant_identity_sublayers(
        &mut weights,
        &[SublayerRef::attn(1), SublayerRef::ffn(2), SublayerRef::ffn(5), SublayerRef::attn(6)],
    )?;
    let model = Model::new(weights);

    let calibration = tasks(
        "cal",
        &["the early bird catches the worm", "strike while the iron is hot"],
        0,
    );
    let evaluation = tasks(
        "eval",
        &["make hay while the sun shines", "a rolling stone gathers no moss"],
        12,
    );
    let profile = profile_tasks(&model, &calibration, 10, ProfileRequest::Decode)?
        .decode
        .expect("requested");

    let out_dir = std::env::temp_dir().join("adaskip_compare_example");
    let report = compare_strategies(
        &model,
        &profile,
        &evaluation,
        &[4, 8],
        &CompareStrategy::parse_list("all")?,
        &out_dir,
        &CompareOptions {
            timing: false,
            ..CompareOptions::default()
        },
    )?;

    println!(
        "{:<12} {:>4} {:>9} {:>12} {:>12}",
        "strategy", "2m", "task", "top1", "flop ratio"
    );
    for row in &report.rows {
        println!(
            "{:<12} {:>4} {:>9} {:>12.4} {:>12.4}",
            row.strategy, row.target_2m, row.task_id, row.top1_agreement, row.flop_ratio
        );
    }
    for e in &report.cell_errors {
        println!("cell {} at 2m={} failed: {}", e.strategy, e.target_2m, e.message);
    }
    println!(
        "\nwrote comparison.csv, comparison.json, and plans/ under {}",
        out_dir.display()
    );
    Ok(())
}
