use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use expen::bench::{emit_outputs, run_benchmark, BrockettKind, OutputFormat, ProblemKind, RunSpec, SolverKind};

/// Solve the nonlinear eigenvalue or Brockett benchmark through the exact
/// penalty and print the averaged table row.
#[derive(Debug, Parser)]
#[command(name = "expen-bench", version)]
struct Args {
    #[arg(long, value_enum, default_value = "nleig")]
    problem: ProblemKind,
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    p: usize,
    /// Coupling of the nonlinear eigenvalue energy.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// How the Brockett matrices are generated.
    #[arg(long, value_enum, default_value = "random")]
    brockett_kind: BrockettKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Penalty parameter; defaults to ||grad f(X0)||_F / 10 per repeat.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    grad_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "frcg")]
    solver: SolverKind,
    /// Write one convergence trace CSV per repeat.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value = "expen-out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    format: OutputFormat,
}

const EXIT_INVALID_SPEC: u8 = 1;
const EXIT_ALL_FAILED: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID_SPEC) } else { ExitCode::SUCCESS };
        }
    };
    let spec = RunSpec {
        problem: args.problem,
        n: args.n,
        p: args.p,
        alpha: args.alpha,
        brockett_kind: args.brockett_kind,
        seed: args.seed,
        repeats: args.repeats,
        beta_override: args.beta,
        grad_tol: args.grad_tol,
        max_iters: args.max_iters,
        solver: args.solver,
        trace: args.trace,
    };
    if let Err(e) = spec.validate() {
        eprintln!("invalid run specification: {e}");
        return ExitCode::from(EXIT_INVALID_SPEC);
    }

    let outcome = match run_benchmark(&spec) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("benchmark failed: {e}");
            return ExitCode::from(EXIT_ALL_FAILED);
        }
    };
    if let Err(e) = emit_outputs(std::slice::from_ref(&outcome.row), Some(&outcome), args.format, &args.out_dir) {
        eprintln!("writing outputs failed: {e}");
        return ExitCode::FAILURE;
    }

    let r = &outcome.row;
    println!("Solver      Fval             Iteration  Stationarity  Feasibility  CPU time(s)");
    println!(
        "{:<11} {:<16.6e} {:<10.1} {:<13.2e} {:<12.2e} {:.2}",
        r.solver, r.fval, r.iteration, r.stationarity, r.feasibility, r.cpu_seconds
    );
    let failed = outcome.failed_runs();
    if failed > 0 {
        eprintln!("{failed} of {} repeats ended in line-search failure", outcome.runs.len());
    }
    if outcome.all_failed() {
        return ExitCode::from(EXIT_ALL_FAILED);
    }
    ExitCode::SUCCESS
}
