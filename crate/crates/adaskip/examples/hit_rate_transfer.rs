//! Do the sublayers chosen on one task suite stay redundant on another?
//! Profile two disjoint suites and measure top-k overlap.
//!
//! ```bash
//! cargo run --example hit_rate_transfer
//! ```

use adaskip::bench::{hit_rate, top_k, KindFilter, Task};
use adaskip::model::{init_model, plant_identity_sublayers, Model, ModelConfig, SublayerRef, VOCAB_SIZE};
use adaskip::profiler::{profile_tasks, ProfileRequest};

fn tasks(prefix: &str, prompts: &[&str]) -> Vec<Task> {
    prompts
        .iter()
        .enumerate()
        .map(|(i, p)| Task {
            id: format!("{prefix}-{i}"),
            prompt: p.to_string(),
            max_new_tokens: 0,
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
    let planted = [SublayerRef::attn(1), SublayerRef::ffn(2), SublayerRef::ffn(5), SublayerRef::attn(6)];
    plant_identity_sublayers(&mut weights, &planted)?;
    let model = Model::new(weights);

    let source = profile_tasks(
        &model,
        &tasks("src", &["many hands make light work", "two heads are better than one"]),
        10,
        ProfileRequest::Decode,
    )?
    .decode
    .expect("requested");
    let dest = profile_tasks(
        &model,
        &tasks("dst", &["absence makes the heart grow fonder", "birds of a feather flock together"]),
        10,
        ProfileRequest::Decode,
    )?
    .decode
    .expect("requested");

    for kind in [KindFilter::Both, KindFilter::Ffn, KindFilter::Attention] {
        print!("{kind}:");
        for k in [2, 4, 6] {
            match top_k(&source, k, kind) {
                Ok(predicted) => {
                    let rate = hit_rate(&predicted, &dest, k, kind)?;
                    print!("  k={k} rate {rate:.2}");
                }
                // k can exceed the filtered pool (only 8 attention
                // sublayers here, and fewer when filtering).
                Err(e) => print!("  k={k} ({e})"),
            }
        }
        println!();
    }

    // The planted passthroughs transfer perfectly: both suites rank them
    // on top, whatever the prompts.
    let predicted = top_k(&source, 4, KindFilter::Both)?;
    assert_eq!(predicted, planted.into_iter().collect());
    assert_eq!(hit_rate(&predicted, &dest, 4, KindFilter::Both)?, 1.0);
    println!("\ntop-4 on the source suite is exactly the planted set; hit rate 1.0 on the destination");
    Ok(())
}
