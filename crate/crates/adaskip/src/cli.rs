//! The `adaskip` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 on success, 2 when inputs or arguments are invalid, 3
//! when a valid request fails at runtime (I/O, corrupt files).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    compare_strategies, emit_run_report, hit_rate, load_tasks, run_tasks, top_k,
    CompareOptions, CompareStrategy, KindFilter, RunOptions,
};
use crate::error::{Error, Result};
use crate::model::{
    init_model, load_weights, plant_identity_sublayers, save_weights, Model, ModelConfig,
    SublayerRef,
};
use crate::policy::{
    baseline_plan, build_offline_plan, load_plan, save_plan, PlanOptions, PlanSize, Strategy,
};
use crate::profiler::{load_profile, profile_tasks, save_profile, ProfileRequest};

#[derive(Parser)]
#[command(
    name = "adaskip",
    about = "Adaptive sublayer skipping for a toy decoder-only transformer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure per-sublayer IO similarity over calibration tasks.
    Profile(ProfileArgs),
    /// Build a skip plan from a profile.
    Plan(PlanArgs),
    /// Execute a plan over tasks and report metrics.
    Run(RunArgs),
    /// Run the strategy grid and report against the full model.
    Compare(CompareArgs),
    /// Top-k overlap between a source and a destination profile.
    HitRate(HitRateArgs),
    /// Deterministically initialize model weights.
    GenModel(GenModelArgs),
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    /// prefill, decode, or both.
    #[arg(long, default_value = "both")]
    phase: String,
    /// Decode tokens measured per task.
    #[arg(long, default_value_t = 32)]
    decode_len: usize,
    /// Output profile; with --phase both, writes <out stem>.prefill.json
    /// and <out stem>.decode.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    profile: PathBuf,
    /// Target acceleration ratio (>= 1).
    #[arg(long, conflicts_with = "target_sublayers")]
    alpha: Option<f64>,
    /// Exact skipped sublayer count (even).
    #[arg(long)]
    target_sublayers: Option<usize>,
    /// adaskip, early, periodic, or exit.
    #[arg(long, default_value = "adaskip")]
    strategy: String,
    /// Keep the first layer pair out of the ranking.
    #[arg(long)]
    protect_first: bool,
    /// Keep the last layer pair out of the ranking.
    #[arg(long)]
    protect_last: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    /// Decode forwards observed before the skip set may grow.
    #[arg(long, default_value_t = 20)]
    online_window: usize,
    /// off, planned-window, or full-window.
    #[arg(long, default_value = "planned-window")]
    online: String,
    /// Skip wall-clock measurement for byte-reproducible reports.
    #[arg(long)]
    no_timing: bool,
    /// Report path, .json or .csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    /// Comma list of skipped sublayer counts, e.g. 8,16.
    #[arg(long)]
    targets: String,
    /// "all" or a comma list of full, adaskip, early, periodic, exit.
    #[arg(long, default_value = "all")]
    strategies: String,
    #[arg(long, default_value_t = 20)]
    online_window: usize,
    #[arg(long, default_value = "planned-window")]
    online: String,
    #[arg(long)]
    no_timing: bool,
    /// Output directory for comparison.csv, comparison.json, and plans/.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HitRateArgs {
    #[arg(long)]
    src_profile: PathBuf,
    #[arg(long)]
    dest_profile: PathBuf,
    /// Comma list of k values.
    #[arg(long, default_value = "4,6,10")]
    k: String,
    /// attn, ffn, or both.
    #[arg(long, default_value = "both")]
    kind: String,
}

#[derive(Args)]
struct GenModelArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Comma list of layer:kind sublayers to overwrite with exact
    /// passthroughs, e.g. 1:attn,2:ffn.
    #[arg(long)]
    plant_identity: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn load_model(config_path: &Path, weights_path: &Path) -> Result<Model> {
    let config = ModelConfig::from_json_file(config_path)?;
    Ok(Model::new(load_weights(weights_path, &config)?))
}

fn parse_usize_list(spec: &str, what: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad {what} value {s:?}")))
        })
        .collect()
}

fn profile_cmd(args: &ProfileArgs) -> Result<()> {
    let request = match args.phase.as_str() {
        "prefill" => ProfileRequest::Prefill,
        "decode" => ProfileRequest::Decode,
        "both" => ProfileRequest::Both,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown phase {other:?} (expected prefill, decode, or both)"
            )))
        }
    };
    let model = load_model(&args.config, &args.model)?;
    let tasks = load_tasks(&args.tasks)?;
    let bundle = profile_tasks(&model, &tasks, args.decode_len, request)?;
    match request {
        ProfileRequest::Prefill => {
            save_profile(&args.out, &bundle.prefill.expect("requested phase"))?
        }
        ProfileRequest::Decode => {
            save_profile(&args.out, &bundle.decode.expect("requested phase"))?
        }
        ProfileRequest::Both => {
            let stem = args.out.with_extension("");
            let with_phase = |phase: &str| {
                let mut name = stem.as_os_str().to_os_string();
                name.push(format!(".{phase}.json"));
                PathBuf::from(name)
            };
            save_profile(&with_phase("prefill"), &bundle.prefill.expect("requested"))?;
            save_profile(&with_phase("decode"), &bundle.decode.expect("requested"))?;
        }
    }
    Ok(())
}

fn plan_cmd(args: &PlanArgs) -> Result<()> {
    let profile = load_profile(&args.profile)?;
    let size = match (args.alpha, args.target_sublayers) {
        (Some(alpha), None) => PlanSize::Alpha(alpha),
        (None, Some(target)) => PlanSize::TargetSublayers(target),
        _ => {
            return Err(Error::InvalidInput(
                "pass exactly one of --alpha or --target-sublayers".to_string(),
            ))
        }
    };
    let strategy: Strategy = args.strategy.parse()?;
    let plan = match strategy {
        Strategy::Adaskip => build_offline_plan(
            &profile,
            size,
            PlanOptions {
                protect_first: args.protect_first,
                protect_last: args.protect_last,
            },
        )?,
        baseline => {
            if args.protect_first || args.protect_last {
                return Err(Error::InvalidInput(
                    "protection flags only apply to adaskip plans; baselines fix \
                     their own boundaries"
                        .to_string(),
                ));
            }
            baseline_plan(baseline, profile.n_layers(), size)?
        }
    };
    save_plan(&args.out, &plan)
}

fn run_cmd(args: &RunArgs) -> Result<()> {
    let model = load_model(&args.config, &args.model)?;
    let plan = load_plan(&args.plan)?;
    let tasks = load_tasks(&args.tasks)?;
    let options = RunOptions {
        online: args.online.parse()?,
        online_window: args.online_window,
        timing: !args.no_timing,
    };
    let report = run_tasks(&model, &plan, &tasks, &options)?;
    emit_run_report(&args.out, &report)
}

fn compare_cmd(args: &CompareArgs) -> Result<()> {
    let model = load_model(&args.config, &args.model)?;
    let profile = load_profile(&args.profile)?;
    let tasks = load_tasks(&args.tasks)?;
    let targets = parse_usize_list(&args.targets, "target")?;
    let strategies = CompareStrategy::parse_list(&args.strategies)?;
    let options = CompareOptions {
        online: args.online.parse()?,
        online_window: args.online_window,
        timing: !args.no_timing,
    };
    let report = compare_strategies(
        &model, &profile, &tasks, &targets, &strategies, &args.out, &options,
    )?;
    for e in &report.cell_errors {
        eprintln!("cell {} target {} failed: {}", e.strategy, e.target_2m, e.message);
    }
    println!(
        "{} rows, {} failed cells -> {}",
        report.rows.len(),
        report.cell_errors.len(),
        args.out.display()
    );
    Ok(())
}

fn hit_rate_cmd(args: &HitRateArgs) -> Result<()> {
    let src = load_profile(&args.src_profile)?;
    let dest = load_profile(&args.dest_profile)?;
    let kind: KindFilter = args.kind.parse()?;
    let ks = parse_usize_list(&args.k, "k")?;
    let mut results = Vec::new();
    for k in ks {
        let predicted = top_k(&src, k, kind)?;
        let rate = hit_rate(&predicted, &dest, k, kind)?;
        results.push(serde_json::json!({ "k": k, "hit_rate": rate }));
    }
    let out = serde_json::json!({ "kind": kind.to_string(), "results": results });
    println!("{}", serde_json::to_string_pretty(&out).expect("hit rate serialization"));
    Ok(())
}

fn gen_model_cmd(args: &GenModelArgs) -> Result<()> {
    let config = ModelConfig::from_json_file(&args.config)?;
    let mut weights = init_model(&config, args.seed)?;
    if let Some(spec) = &args.plant_identity {
        let sublayers: Vec<SublayerRef> = spec
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<_>>>()?;
        plant_identity_sublayers(&mut weights, &sublayers)?;
    }
    save_weights(&args.out, &weights)?;
    println!("{}", weights.content_digest());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Profile(args) => profile_cmd(args),
        Command::Plan(args) => plan_cmd(args),
        Command::Run(args) => run_cmd(args),
        Command::Compare(args) => compare_cmd(args),
        Command::HitRate(args) => hit_rate_cmd(args),
        Command::GenModel(args) => gen_model_cmd(args),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
