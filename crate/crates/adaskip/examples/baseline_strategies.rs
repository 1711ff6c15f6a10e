//! The three positional baselines skip whole blocks by index, without
//! profiling and without scale compensation.
//!
//! ```bash
//! cargo run --example baseline_strategies
//! ```

use adaskip::policy::{baseline_plan, skip_count, theoretical_speedup, PlanSize, Strategy};

fn main() -> adaskip::Result<()> {
    let n_layers = 8;
    for strategy in [Strategy::EarlySkip, Strategy::Periodic, Strategy::EarlyExit] {
        println!("{strategy}:");
        for target in [2usize, 4, 6] {
            let plan = baseline_plan(strategy, n_layers, PlanSize::TargetSublayers(target))?;
            let blocks: Vec<String> = plan
                .skipped
                .iter()
                .map(|s| s.sublayer().to_string())
                .collect();
            println!(
                "  2m={target} skips [{}] at theoretical speedup {:.2}",
                blocks.join(", "),
                theoretical_speedup(n_layers, target / 2)
            );
            // Baselines drop attention and FFN together, one block at a
            // time, with unit scales.
            assert!(plan.skipped.iter().all(|s| s.scale == 1.0));
            assert!(plan.beta.is_none());
        }
    }

    // Alpha maps to a block budget the same way for every strategy.
    for alpha in [1.1, 1.33, 2.0] {
        let m = skip_count(n_layers, alpha)?;
        println!("alpha {alpha:<4} on {n_layers} blocks -> skip {m} blocks (2m={})", 2 * m);
    }

    // Early exit keeps the first block by construction; periodic also pins
    // the last one. Requesting more than the strategy can shed is an error.
    let err = baseline_plan(Strategy::Periodic, n_layers, PlanSize::TargetSublayers(14));
    println!("periodic at 2m=14: {}", err.unwrap_err());
    Ok(())
}
