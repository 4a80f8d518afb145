//! `bench`: run throughput/accuracy experiments over the relaxed
//! structures, or analyze the window-dynamics chain.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use relax2d::markov::{
    extra_steps_bound, simulate_sequential, stationary_solve, ChainModel, ChainVariant,
};
use relax2d_cli::{
    emit_csv, format_csv, run, Affinity, ExperimentConfig, StructureId, Workload,
};

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Benchmark driver for width x depth relaxed data structures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration and report a CSV row.
    Run(RunArgs),
    /// Solve and simulate the window-dynamics chain.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Structure id (e.g. stack-c, stack-d, queue-d, deque-d, counter-c,
    /// counter-d, treiber, ms-queue, faa, stack-random, stack-random-c2,
    /// queue-random, queue-random-c2, counter-random, counter-random-c2,
    /// stack-robin, queue-robin, counter-robin).
    #[arg(long)]
    structure: String,
    #[arg(long)]
    threads: usize,
    /// Target relaxation bound; width/depth are derived from it.
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<u64>,
    #[arg(long = "shift-up")]
    shift_up: Option<u64>,
    #[arg(long = "shift-down")]
    shift_down: Option<u64>,
    /// Probability an operation is a put.
    #[arg(long = "put-rate", default_value_t = 0.5)]
    put_rate: f64,
    /// Seconds per repeat (timed mode; the default).
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    /// Per-thread operation budget; overrides --duration.
    #[arg(long)]
    ops: Option<u64>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Items inserted before timing starts.
    #[arg(long, default_value_t = 1 << 17)]
    prefill: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Measure rank-error accuracy with the sequential shadow oracle.
    #[arg(long)]
    measure: bool,
    /// Thread pinning policy: none, compact or scatter.
    #[arg(long, default_value = "none")]
    affinity: String,
    /// Write the result row(s) to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    depth: u64,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    shift: u64,
    /// Put probability; 1 selects the monotone (put-only) chain.
    #[arg(long)]
    p: f64,
    /// Simulated operations.
    #[arg(long)]
    ops: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run_command(args),
        Command::Analyze(args) => analyze_command(args),
    }
}

fn run_command(args: RunArgs) -> Result<()> {
    let structure: StructureId = args
        .structure
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))?;
    let affinity: Affinity = args
        .affinity
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))?;
    let cfg = ExperimentConfig {
        structure,
        threads: args.threads,
        width: args.width,
        depth: args.depth,
        shift_up: args.shift_up,
        shift_down: args.shift_down,
        target_k: args.k,
        put_rate: args.put_rate,
        workload: match args.ops {
            Some(n) => Workload::OpsPerThread(n),
            None => Workload::DurationSecs(args.duration),
        },
        repeats: args.repeats,
        prefill: args.prefill,
        seed: args.seed,
        measure: args.measure,
        affinity,
    };
    let row = run(&cfg).context("experiment failed")?;
    let rows = vec![row];
    print!("{}", format_csv(&rows));
    if let Some(path) = args.out {
        emit_csv(&rows, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.5e}")
    }
}

fn analyze_command(args: AnalyzeArgs) -> Result<()> {
    if args.ops == 0 {
        bail!("--ops must be at least 1");
    }
    let model = if args.p == 1.0 {
        ChainModel::decoupled(args.depth, args.width)?
    } else {
        ChainModel::coupled(args.depth, args.width, args.shift, args.p)?
    };
    if model.variant == ChainVariant::Decoupled && args.shift != args.depth {
        bail!("the put-only chain shifts by depth; pass --shift equal to --depth");
    }
    let pi = stationary_solve(&model)?;
    let report = simulate_sequential(&model, args.ops, args.seed);
    let tv = pi.tv_distance(&report.histogram);
    // The analytic bound is stated for shift = depth.
    let bound = if args.shift == args.depth {
        fmt_g6(extra_steps_bound(&model))
    } else {
        String::new()
    };
    let mut text = String::from("depth,width,shift,p,bound,empirical_mean,tv_distance\n");
    text.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        args.depth,
        args.width,
        args.shift,
        fmt_g6(args.p),
        bound,
        fmt_g6(report.extra_per_op()),
        fmt_g6(tv),
    ));
    print!("{text}");
    if let Some(path) = args.out {
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
