//! Unconstrained solvers for the penalty model: Fletcher-Reeves nonlinear CG
//! and a steepest-descent baseline, both driven by a strong Wolfe line search.

mod linesearch;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{feasibility, postprocess, riemannian_grad, stationarity_report, StationarityReport};
use crate::linalg::{check_dims, inner, DenseMatrix};
use crate::model::{ExPenModel, SmoothObjective};

pub use linesearch::{strong_wolfe, LineSearchOutcome, Trial, MAX_LINE_SEARCH_ITERS, MAX_STEP};

/// Directions with `<grad h, D> >= -RESTART_TOL ||grad h|| ||D||` are replaced
/// by steepest descent.
pub const RESTART_TOL: f64 = 1e-12;
/// Bounds for the warm-started initial trial step.
pub const INITIAL_STEP_RANGE: (f64, f64) = (1e-12, 1e6);
/// Step-length bound `eta_k ||D_k||_F <= 1/24` from the convergence theory;
/// logged, never enforced.
pub const STEP_LENGTH_BOUND: f64 = 1.0 / 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sufficient-decrease parameter.
    pub delta: f64,
    /// Curvature parameter.
    pub sigma: f64,
    /// Stop once `||grad h||_F <= grad_tol`.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Trial step of the very first line search.
    pub initial_step: f64,
    /// Restart with steepest descent when consecutive gradients are far from
    /// orthogonal, `|<g_{k+1}, g_k>| >= nu ||g_{k+1}||^2`. `None` disables it.
    pub restart_orthogonality: Option<f64>,
    pub trace_enabled: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            sigma: 0.4,
            grad_tol: 1e-3,
            max_iters: 10_000,
            initial_step: 1.0,
            restart_orthogonality: Some(0.1),
            trace_enabled: false,
        }
    }
}

impl SolverConfig {
    /// `0 < delta <= sigma <= 1/2`, positive tolerances and step.
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta > 0.0 && self.delta <= self.sigma && self.sigma <= 0.5;
        if !ok {
            return Err(Error::invalid(
                "SolverConfig",
                format!("need 0 < delta <= sigma <= 1/2, got delta={}, sigma={}", self.delta, self.sigma),
            ));
        }
        if !(self.grad_tol >= 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::invalid("SolverConfig", format!("grad_tol must be >= 0, got {}", self.grad_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("SolverConfig", "max_iters must be positive"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::invalid(
                "SolverConfig",
                format!("initial_step must be positive, got {}", self.initial_step),
            ));
        }
        if let Some(nu) = self.restart_orthogonality {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::invalid(
                    "SolverConfig",
                    format!("restart_orthogonality must be positive, got {nu}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradTol,
    MaxIters,
    LineSearchFailure,
}

/// One row per iterate `X_k`. The step fields describe the move out of `X_k`
/// and are zero on the final row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterTrace {
    pub k: usize,
    pub h_val: f64,
    pub grad_h_norm: f64,
    pub feas: f64,
    /// `f(X_k)` at the unprojected iterate.
    pub f_val: f64,
    pub step: f64,
    pub dir_norm: f64,
    /// `<grad h(X_k), D_k>`
    pub slope: f64,
    /// Zoutendijk summand `<grad h(X_k), D_k>^2 / ||D_k||_F^2`.
    pub zoutendijk_term: f64,
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    /// Projection of the last iterate onto the manifold.
    pub final_point: DenseMatrix,
    /// Last iterate before projection.
    pub raw_point: DenseMatrix,
    /// `f` at the projected point.
    pub fval: f64,
    pub iterations: usize,
    /// `||grad f(P_S(X))||_F`
    pub stationarity: f64,
    /// `||P^T P - I||_F` of the projected point.
    pub feasibility: f64,
    pub wall_seconds: f64,
    pub termination: Termination,
    pub trace: Option<Vec<IterTrace>>,
    pub h_initial: f64,
    pub h_final: f64,
    /// `h(X) - h(P_S(X))` from the postprocess step.
    pub postprocess_decrease: f64,
    /// Certificate evaluated at the raw last iterate.
    pub certificate: StationarityReport,
    /// The CG recurrence produced a strict descent direction at every step,
    /// i.e. no restart was needed.
    pub descent_held: bool,
    /// `eta_k ||D_k||_F <= 1/24` at every step.
    pub step_bound_held: bool,
    pub restarts: usize,
    pub line_search_evaluations: usize,
    pub line_search_error: Option<String>,
}

/// State exposed to observers before each line search.
#[derive(Debug)]
pub struct IterateView<'a> {
    pub k: usize,
    pub x: &'a DenseMatrix,
    pub grad: &'a DenseMatrix,
    pub direction: &'a DenseMatrix,
    /// FR ratio that produced `direction` (0 at `k = 0` and after a restart).
    pub tau: f64,
    pub restarted: bool,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    FletcherReeves,
    SteepestDescent,
}

/// Fletcher-Reeves CG on `h`: `D_0 = -grad h(X_0)`,
/// `tau_k = ||grad h(X_{k+1})||^2 / ||grad h(X_k)||^2`,
/// `D_{k+1} = -grad h(X_{k+1}) + tau_k D_k`.
pub fn frcg_solve<F: SmoothObjective>(
    model: &ExPenModel<F>,
    x0: &DenseMatrix,
    config: &SolverConfig,
) -> Result<SolverReport> {
    run(model, x0, config, Method::FletcherReeves, &mut |_| {})
}

/// [`frcg_solve`] with a callback invoked at every iterate.
pub fn frcg_solve_observed<F: SmoothObjective>(
    model: &ExPenModel<F>,
    x0: &DenseMatrix,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&IterateView<'_>),
) -> Result<SolverReport> {
    run(model, x0, config, Method::FletcherReeves, observer)
}

/// Steepest descent with the same line search and report contract.
pub fn gd_solve<F: SmoothObjective>(
    model: &ExPenModel<F>,
    x0: &DenseMatrix,
    config: &SolverConfig,
) -> Result<SolverReport> {
    run(model, x0, config, Method::SteepestDescent, &mut |_| {})
}

fn run<F: SmoothObjective>(
    model: &ExPenModel<F>,
    x0: &DenseMatrix,
    config: &SolverConfig,
    method: Method,
    observer: &mut dyn FnMut(&IterateView<'_>),
) -> Result<SolverReport> {
    config.validate()?;
    check_dims("solve", x0, model.dims())?;
    crate::linalg::ensure_finite("solve", x0)?;

    let started = Instant::now();
    let mut x = x0.clone();
    let (mut h, mut grad) = model.value_and_gradient(&x)?;
    let h_initial = h;
    let mut gnorm2 = grad.norm_squared();
    let mut direction = -&grad;
    let mut tau = 0.0;

    let mut trace = config.trace_enabled.then(Vec::new);
    let mut k = 0;
    let mut prev_step_slope: Option<f64> = None;
    let mut descent_held = true;
    let mut step_bound_held = true;
    let mut restarts = 0;
    let mut pending_restart = false;
    let mut ls_evals = 0;
    let mut ls_error = None;

    let termination = loop {
        let gnorm = gnorm2.sqrt();
        if gnorm <= config.grad_tol || gnorm == 0.0 {
            push_final(&mut trace, model, k, h, gnorm, &x)?;
            break Termination::GradTol;
        }
        if k >= config.max_iters {
            push_final(&mut trace, model, k, h, gnorm, &x)?;
            break Termination::MaxIters;
        }

        let mut slope = inner(&grad, &direction);
        let mut restarted = std::mem::take(&mut pending_restart);
        if restarted {
            restarts += 1;
        } else if slope >= -RESTART_TOL * gnorm * direction.norm() {
            if k > 0 {
                descent_held = false;
            }
            direction = -&grad;
            slope = -gnorm2;
            tau = 0.0;
            restarted = k > 0;
            restarts += usize::from(restarted);
        }

        observer(&IterateView {
            k,
            x: &x,
            grad: &grad,
            direction: &direction,
            tau,
            restarted,
            h,
        });

        let initial = match prev_step_slope {
            None => config.initial_step.min(1.0 / gnorm),
            Some(prev) => (prev / slope).clamp(INITIAL_STEP_RANGE.0, INITIAL_STEP_RANGE.1),
        };

        let search = strong_wolfe(h, slope, initial, config, |t| {
            let candidate = &x + &direction * t;
            let (value, g) = model.value_and_gradient(&candidate)?;
            Ok(Trial {
                value,
                slope: inner(&g, &direction),
                payload: (candidate, g),
            })
        });
        let outcome = match search {
            Ok(outcome) => outcome,
            Err(Error::LineSearch(msg)) => {
                push_final(&mut trace, model, k, h, gnorm, &x)?;
                ls_error = Some(msg);
                break Termination::LineSearchFailure;
            }
            Err(e) => return Err(e),
        };
        ls_evals += outcome.evaluations;

        let dir_norm = direction.norm();
        let step = outcome.step;
        step_bound_held &= step * dir_norm <= STEP_LENGTH_BOUND;
        if let Some(trace) = trace.as_mut() {
            trace.push(IterTrace {
                k,
                h_val: h,
                grad_h_norm: gnorm,
                feas: feasibility(&x),
                f_val: model.objective().value(&x)?,
                step,
                dir_norm,
                slope,
                zoutendijk_term: slope * slope / (dir_norm * dir_norm),
                restarted,
            });
        }

        let (x_new, g_new) = outcome.trial.payload;
        x = x_new;
        h = outcome.trial.value;
        let gnorm2_new = g_new.norm_squared();
        let g_prev = std::mem::replace(&mut grad, g_new);
        prev_step_slope = Some(step * slope);

        match method {
            Method::FletcherReeves => {
                let nu = config.restart_orthogonality.unwrap_or(f64::INFINITY);
                if inner(&grad, &g_prev).abs() >= nu * gnorm2_new {
                    pending_restart = true;
                    tau = 0.0;
                    direction = -&grad;
                } else {
                    tau = gnorm2_new / gnorm2;
                    direction *= tau;
                    direction -= &grad;
                }
            }
            Method::SteepestDescent => {
                direction = -&grad;
            }
        }
        gnorm2 = gnorm2_new;
        k += 1;
    };
    let wall_seconds = started.elapsed().as_secs_f64();

    let (projected, postprocess_decrease) = postprocess(model, &x)?;
    let fval = model.objective().value(&projected)?;
    let stationarity = riemannian_grad(model.objective(), &projected)?.norm();
    let certificate = stationarity_report(model, &x)?;
    Ok(SolverReport {
        feasibility: feasibility(&projected),
        final_point: projected,
        raw_point: x,
        fval,
        iterations: k,
        stationarity,
        wall_seconds,
        termination,
        trace,
        h_initial,
        h_final: h,
        postprocess_decrease,
        certificate,
        descent_held,
        step_bound_held,
        restarts,
        line_search_evaluations: ls_evals,
        line_search_error: ls_error,
    })
}

fn push_final<F: SmoothObjective>(
    trace: &mut Option<Vec<IterTrace>>,
    model: &ExPenModel<F>,
    k: usize,
    h: f64,
    gnorm: f64,
    x: &DenseMatrix,
) -> Result<()> {
    if let Some(trace) = trace.as_mut() {
        trace.push(IterTrace {
            k,
            h_val: h,
            grad_h_norm: gnorm,
            feas: feasibility(x),
            f_val: model.objective().value(x)?,
            step: 0.0,
            dir_norm: 0.0,
            slope: 0.0,
            zoutendijk_term: 0.0,
            restarted: false,
        });
    }
    Ok(())
}
