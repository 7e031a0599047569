use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use vow::Mode;
use vow_bench::{report_csv, report_table, run_benchmark_scaled, Benchmark, BenchResult};

#[derive(Parser)]
#[command(about = "Times benchmarks with ownership and deadlock checking on and off")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark, or all of them.
    Run(RunArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Modes {
    Baseline,
    Verified,
    Both,
}

#[derive(clap::Args)]
struct RunArgs {
    /// sieve, qsort, randomized, smithwaterman, or all.
    #[arg(long, default_value = "all")]
    name: String,
    #[arg(long, value_enum, default_value_t = Modes::Both)]
    mode: Modes,
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Also write per-run results as CSV to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Problem size relative to the default.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

fn main() -> Result<()> {
    let Command::Run(args) = Cli::parse().command;
    if args.scale.is_nan() || args.scale <= 0.0 {
        bail!("--scale must be positive");
    }
    let benches: Vec<Benchmark> = if args.name == "all" {
        Benchmark::ALL.to_vec()
    } else {
        vec![args.name.parse()?]
    };
    let modes: &[Mode] = match args.mode {
        Modes::Baseline => &[Mode::Baseline],
        Modes::Verified => &[Mode::Verified],
        Modes::Both => &[Mode::Baseline, Mode::Verified],
    };

    let mut results: Vec<BenchResult> = Vec::new();
    for bench in benches {
        for &mode in modes {
            let r = run_benchmark_scaled(bench.name(), mode, args.iters, args.warmup, args.scale)?;
            eprintln!(
                "{:<14} {:<9} mean {:.4}s  sd {:.4}s  tasks {}  gets {}  sets {}",
                r.name,
                r.mode,
                r.mean_s(),
                r.stddev_s(),
                r.tasks,
                r.gets,
                r.sets
            );
            results.push(r);
        }
    }

    if args.mode == Modes::Both {
        print!("{}", report_table(&results)?);
    } else {
        print!("{}", report_csv(&results));
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, report_csv(&results))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
