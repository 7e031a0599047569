use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};
use vow::lp::{
    explore, parse_program, random_program, ExploreError, ExploreOptions, Limits, Program,
    RandomParams,
};
use vow::WaitEdge;

/// Explores every interleaving of an L_p program and checks each deadlock
/// alarm against ground truth.
///
/// Exit status: 0 when every interleaving agrees, 1 on a counterexample, 2
/// when a budget is exceeded, 3 when the input cannot be read or parsed.
#[derive(Parser)]
#[command(group(ArgGroup::new("input").required(true).args(["file", "random"])))]
struct Cli {
    /// Program file.
    file: Option<PathBuf>,
    /// Check generated programs instead of a file.
    #[arg(long)]
    random: bool,
    /// First seed for --random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How many programs --random checks.
    #[arg(long, default_value_t = 1000)]
    programs: u64,
    #[arg(long, default_value_t = 4)]
    max_tasks: usize,
    #[arg(long, default_value_t = 4)]
    max_promises: usize,
    /// Distinct states explored per program; every schedule through a state
    /// is covered by exploring it once.
    #[arg(long, default_value_t = Limits::default().max_states)]
    max_interleavings: usize,
    #[arg(long, default_value_t = Limits::default().max_schedule_len)]
    max_schedule_len: usize,
    /// Print the full step trace of a counterexample.
    #[arg(long)]
    trace_on_fail: bool,
    /// Publish the wait edge after the traversal instead of before it.
    #[arg(long, hide = true)]
    late_wait_edge: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = ExploreOptions {
        limits: Limits {
            max_states: cli.max_interleavings,
            max_schedule_len: cli.max_schedule_len,
        },
        wait_edge: if cli.late_wait_edge {
            WaitEdge::AfterTraversal
        } else {
            WaitEdge::BeforeTraversal
        },
        traversal_budget: None,
    };

    if let Some(path) = &cli.file {
        let program = match std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_program(&text).map_err(|e| e.to_string()))
        {
            Ok(p) => p,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return ExitCode::from(3);
            }
        };
        return check(&program, &options, cli.trace_on_fail, true);
    }

    let params = RandomParams {
        max_tasks: cli.max_tasks,
        max_promises: cli.max_promises,
        ..RandomParams::default()
    };
    let (mut states, mut interleavings) = (0usize, 0u128);
    for seed in cli.seed..cli.seed.saturating_add(cli.programs) {
        let program = random_program(seed, &params);
        match explore(&program, &options) {
            Ok(ex) => {
                states += ex.stats.states;
                interleavings = interleavings.saturating_add(ex.stats.interleavings);
            }
            Err(e) => {
                println!("seed {seed}:\n{program}");
                return report_error(&e, cli.trace_on_fail);
            }
        }
    }
    println!(
        "{} programs ok: {states} states, {interleavings} interleavings",
        cli.programs
    );
    ExitCode::SUCCESS
}

fn check(program: &Program, options: &ExploreOptions, trace: bool, verbose: bool) -> ExitCode {
    match explore(program, options) {
        Ok(ex) => {
            if verbose {
                println!(
                    "ok: {} states, {} interleavings, longest schedule {} steps, longest traversal {} reads",
                    ex.stats.states,
                    ex.stats.interleavings,
                    ex.stats.max_schedule_len,
                    ex.stats.max_traversal
                );
                for o in &ex.outcomes {
                    println!("  {o}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => report_error(&e, trace),
    }
}

fn report_error(e: &ExploreError, trace: bool) -> ExitCode {
    match e {
        ExploreError::Counterexample(c) => {
            println!("counterexample: {} after {} steps", c.violation, c.schedule.len());
            if trace {
                print!("{}", c.trace_text());
            } else {
                println!("(rerun with --trace-on-fail for the schedule)");
            }
            ExitCode::from(1)
        }
        ExploreError::BudgetExceeded { .. } => {
            println!("inconclusive: {e}");
            ExitCode::from(2)
        }
        ExploreError::Model(_) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
