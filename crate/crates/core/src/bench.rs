//! Experimental protocol: build a problem, draw random starting points, solve
//! the penalty model, project, and aggregate table rows and traces.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::StationarityReport;
use crate::linalg::DenseMatrix;
use crate::model::{default_beta, ExPenModel, SmoothObjective};
use crate::problems::{random_stiefel, BrockettProblem, NleigProblem, RandomSpec};
use crate::solvers::{frcg_solve, gd_solve, IterTrace, SolverConfig, SolverReport, Termination};

pub const TABLE_HEADER: [&str; 6] = ["solver", "fval", "iteration", "stationarity", "feasibility", "cpu_seconds"];
pub const TRACE_HEADER: [&str; 5] = ["k", "h", "grad_h_norm", "feasibility", "fval_gap"];

/// Offset separating the Brockett instance stream from the starting points.
const INSTANCE_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Nleig,
    Brockett,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BrockettKind {
    /// `B = sym(Z1)`, `C = sym(Z2)`, standard normal.
    Random,
    /// `B = Diag(1, ..., n)`, `C = Diag(p, ..., 1)`.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Frcg,
    Gd,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Frcg => "ExPen-CG",
            SolverKind::Gd => "ExPen-GD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub problem: ProblemKind,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub brockett_kind: BrockettKind,
    pub seed: u64,
    pub repeats: usize,
    pub beta_override: Option<f64>,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub solver: SolverKind,
    pub trace: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Nleig,
            n: 250,
            p: 50,
            alpha: 1.0,
            brockett_kind: BrockettKind::Random,
            seed: 0,
            repeats: 10,
            beta_override: None,
            grad_tol: 1e-3,
            max_iters: 10_000,
            solver: SolverKind::Frcg,
            trace: false,
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n < self.p {
            return Err(Error::invalid("RunSpec", format!("need n >= p >= 1, got n={}, p={}", self.n, self.p)));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("RunSpec", "repeats must be >= 1"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid("RunSpec", format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if let Some(beta) = self.beta_override {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(Error::invalid("RunSpec", format!("beta must be positive, got {beta}")));
            }
        }
        self.solver_config().validate()
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            grad_tol: self.grad_tol,
            max_iters: self.max_iters,
            trace_enabled: self.trace,
            ..SolverConfig::default()
        }
    }
}

/// Averages over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub solver: String,
    pub fval: f64,
    pub iteration: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub beta: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub fval: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub wall_seconds: f64,
    pub certificate: StationarityReport,
    pub h_initial: f64,
    pub h_final: f64,
    pub descent_held: bool,
    pub step_bound_held: bool,
    pub line_search_error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub h: f64,
    pub grad_h_norm: f64,
    pub feasibility: f64,
    pub fval_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub spec: RunSpec,
    pub row: TableRow,
    pub runs: Vec<RunRecord>,
    /// Best post-projection `f` over all repeats; reference for `fval_gap`.
    pub f_ref: f64,
    /// One per repeat when tracing, empty otherwise.
    #[serde(skip)]
    pub traces: Vec<Vec<TraceRow>>,
    /// Full solver reports, in repeat order.
    #[serde(skip)]
    pub reports: Vec<SolverReport>,
}

impl BenchOutcome {
    pub fn failed_runs(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.termination == Termination::LineSearchFailure)
            .count()
    }

    pub fn all_failed(&self) -> bool {
        self.failed_runs() == self.runs.len()
    }
}

pub fn build_nleig(spec: &RunSpec) -> Result<NleigProblem> {
    NleigProblem::new(spec.n, spec.p, spec.alpha)
}

pub fn build_brockett(spec: &RunSpec) -> Result<BrockettProblem> {
    match spec.brockett_kind {
        BrockettKind::Random => BrockettProblem::random(spec.n, spec.p, spec.seed.wrapping_add(INSTANCE_SEED_OFFSET)),
        BrockettKind::Diagonal => {
            let b = DenseMatrix::from_diagonal(&nalgebra::DVector::from_fn(spec.n, |i, _| (i + 1) as f64));
            let c = DenseMatrix::from_diagonal(&nalgebra::DVector::from_fn(spec.p, |i, _| (spec.p - i) as f64));
            BrockettProblem::new(b, c)
        }
    }
}

pub fn run_benchmark(spec: &RunSpec) -> Result<BenchOutcome> {
    spec.validate()?;
    match spec.problem {
        ProblemKind::Nleig => run_with(spec, build_nleig(spec)?),
        ProblemKind::Brockett => run_with(spec, build_brockett(spec)?),
    }
}

fn run_with<F: SmoothObjective + Clone>(spec: &RunSpec, objective: F) -> Result<BenchOutcome> {
    let config = spec.solver_config();
    let mut runs = Vec::with_capacity(spec.repeats);
    let mut reports = Vec::with_capacity(spec.repeats);
    for repeat in 0..spec.repeats {
        let seed = spec.seed.wrapping_add(repeat as u64);
        let x0 = random_stiefel(RandomSpec::new(spec.n, spec.p, seed)?)?;
        let beta = match spec.beta_override {
            Some(beta) => beta,
            None => default_beta(&objective, &x0)?,
        };
        let model = ExPenModel::new(objective.clone(), beta)?;
        let report = match spec.solver {
            SolverKind::Frcg => frcg_solve(&model, &x0, &config)?,
            SolverKind::Gd => gd_solve(&model, &x0, &config)?,
        };
        log::info!(
            "repeat {repeat}: {:?} after {} iterations, fval {:.9e}, stationarity {:.3e}",
            report.termination,
            report.iterations,
            report.fval,
            report.stationarity
        );
        runs.push(RunRecord {
            repeat,
            seed,
            beta,
            termination: report.termination,
            iterations: report.iterations,
            fval: report.fval,
            stationarity: report.stationarity,
            feasibility: report.feasibility,
            wall_seconds: report.wall_seconds,
            certificate: report.certificate,
            h_initial: report.h_initial,
            h_final: report.h_final,
            descent_held: report.descent_held,
            step_bound_held: report.step_bound_held,
            line_search_error: report.line_search_error.clone(),
        });
        reports.push(report);
    }

    let count = runs.len() as f64;
    let mean = |f: fn(&RunRecord) -> f64| runs.iter().map(f).sum::<f64>() / count;
    let row = TableRow {
        solver: spec.solver.label().to_string(),
        fval: mean(|r| r.fval),
        iteration: mean(|r| r.iterations as f64),
        stationarity: mean(|r| r.stationarity),
        feasibility: mean(|r| r.feasibility),
        cpu_seconds: mean(|r| r.wall_seconds),
    };
    let f_ref = runs.iter().map(|r| r.fval).fold(f64::INFINITY, f64::min);
    let traces = reports
        .iter()
        .filter_map(|r| r.trace.as_deref())
        .map(|t| trace_rows(t, f_ref))
        .collect();

    Ok(BenchOutcome {
        spec: spec.clone(),
        row,
        runs,
        f_ref,
        traces,
        reports,
    })
}

fn trace_rows(trace: &[IterTrace], f_ref: f64) -> Vec<TraceRow> {
    trace
        .iter()
        .map(|t| TraceRow {
            k: t.k,
            h: t.h_val,
            grad_h_norm: t.grad_h_norm,
            feasibility: t.feas,
            fval_gap: t.f_val - f_ref,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

/// Nine significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn trace_file_name(repeat: usize) -> String {
    format!("trace_{repeat:03}.csv")
}

/// Writes `table.csv` / `table.json`, `runs.json` (per-repeat metadata
/// including `f_ref`) and one trace CSV per repeat. Returns the paths written.
pub fn emit_outputs(
    rows: &[TableRow],
    outcome: Option<&BenchOutcome>,
    format: OutputFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::invalid("emit_outputs", "no rows to write"));
    }
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();

    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let path = dir.join("table.csv");
        write_table_csv(rows, &path)?;
        written.push(path);
    }
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let path = dir.join("table.json");
        write_json(&path, &rows)?;
        written.push(path);
    }
    if let Some(outcome) = outcome {
        let path = dir.join("runs.json");
        write_json(&path, outcome)?;
        written.push(path);
        for (repeat, trace) in outcome.traces.iter().enumerate() {
            let path = dir.join(trace_file_name(repeat));
            write_trace_csv(trace, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

pub fn write_table_csv(rows: &[TableRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(TABLE_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.solver.clone(),
            format_float(r.fval),
            format_float(r.iteration),
            format_float(r.stationarity),
            format_float(r.feasibility),
            format_float(r.cpu_seconds),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(TRACE_HEADER).map_err(csv_err(path))?;
    for t in trace {
        w.write_record([
            t.k.to_string(),
            format_float(t.h),
            format_float(t.grad_h_norm),
            format_float(t.feasibility),
            format_float(t.fval_gap),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_table_json(path: &Path) -> Result<Vec<TableRow>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(serde_json::from_str(&text)?)
}
