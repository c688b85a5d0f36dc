//! Strong Wolfe line search (bracketing followed by a safeguarded cubic zoom).

use crate::error::{Error, Result};

use super::SolverConfig;

/// Bracketing expansions and zoom iterations are each capped at this count.
pub const MAX_LINE_SEARCH_ITERS: usize = 60;
/// Trial steps beyond this are treated as divergence.
pub const MAX_STEP: f64 = 1e10;

/// Value and directional derivative at a trial step, plus whatever the caller
/// wants back for the accepted step (typically the new iterate and gradient).
#[derive(Debug, Clone)]
pub struct Trial<T> {
    pub value: f64,
    pub slope: f64,
    pub payload: T,
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome<T> {
    pub step: f64,
    pub trial: Trial<T>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    step: f64,
    value: f64,
    slope: f64,
}

impl Point {
    fn finite(&self) -> bool {
        self.value.is_finite() && self.slope.is_finite()
    }
}

/// Finds `step > 0` with
/// `phi(step) <= phi(0) + delta * step * phi'(0)` and
/// `|phi'(step)| <= -sigma * phi'(0)`.
///
/// `eval(t)` returns `phi(t)` and `phi'(t)`. Non-finite trial values are
/// treated as overshooting.
pub fn strong_wolfe<T, E>(
    phi0: f64,
    dphi0: f64,
    initial_step: f64,
    config: &SolverConfig,
    mut eval: E,
) -> Result<LineSearchOutcome<T>>
where
    E: FnMut(f64) -> Result<Trial<T>>,
{
    if !(dphi0 < 0.0) {
        return Err(Error::NonDescent { slope: dphi0 });
    }
    if !phi0.is_finite() {
        return Err(Error::NonFinite { op: "strong_wolfe" });
    }
    if !(initial_step > 0.0 && initial_step.is_finite()) {
        return Err(Error::invalid(
            "strong_wolfe",
            format!("initial step must be positive, got {initial_step}"),
        ));
    }
    let (delta, sigma) = (config.delta, config.sigma);
    let armijo = |p: &Point| sufficient_decrease(p, phi0, dphi0, delta);
    let curvature = |p: &Point| p.slope.abs() <= -sigma * dphi0;
    let noise = VALUE_NOISE * (1.0 + phi0.abs());
    let overshoots = |p: &Point| !p.finite() || p.value > phi0 + delta * p.step * dphi0 + noise;

    let mut evaluations = 0;
    let mut prev = Point {
        step: 0.0,
        value: phi0,
        slope: dphi0,
    };
    let mut step = initial_step;

    for i in 0..MAX_LINE_SEARCH_ITERS {
        if step > MAX_STEP {
            return Err(Error::LineSearch(format!("trial step exceeded {MAX_STEP:e}")));
        }
        let trial = eval(step)?;
        evaluations += 1;
        let cur = Point {
            step,
            value: trial.value,
            slope: trial.slope,
        };
        if overshoots(&cur) || (i > 0 && cur.value > prev.value + noise) {
            return zoom(prev, cur, phi0, dphi0, config, &mut eval, evaluations);
        }
        if curvature(&cur) {
            if armijo(&cur) {
                return Ok(LineSearchOutcome {
                    step,
                    trial,
                    evaluations,
                });
            }
            return zoom(prev, cur, phi0, dphi0, config, &mut eval, evaluations);
        }
        if cur.slope >= 0.0 {
            return zoom(cur, prev, phi0, dphi0, config, &mut eval, evaluations);
        }
        prev = cur;
        step *= 2.0;
    }
    Err(Error::LineSearch(format!(
        "no bracket found after {MAX_LINE_SEARCH_ITERS} expansions"
    )))
}

/// Relative resolution of function values. Differences below
/// `VALUE_NOISE * (1 + |phi(0)|)` are treated as rounding: they never move the
/// bracket, and the slope sign decides instead.
pub const VALUE_NOISE: f64 = 16.0 * f64::EPSILON;

/// Armijo test. When the required decrease is below the rounding level of
/// `phi(0)` the test cannot be resolved, and a non-increase is accepted instead.
fn sufficient_decrease(p: &Point, phi0: f64, dphi0: f64, delta: f64) -> bool {
    let required = -delta * p.step * dphi0;
    if p.value <= phi0 - required {
        return true;
    }
    required <= VALUE_NOISE * (1.0 + phi0.abs()) && p.value <= phi0
}

fn zoom<T, E>(
    mut lo: Point,
    mut hi: Point,
    phi0: f64,
    dphi0: f64,
    config: &SolverConfig,
    eval: &mut E,
    mut evaluations: usize,
) -> Result<LineSearchOutcome<T>>
where
    E: FnMut(f64) -> Result<Trial<T>>,
{
    let noise = VALUE_NOISE * (1.0 + phi0.abs());
    for _ in 0..MAX_LINE_SEARCH_ITERS {
        let width = (hi.step - lo.step).abs();
        if width <= f64::EPSILON * lo.step.max(hi.step) {
            return Err(Error::LineSearch(format!(
                "bracket collapsed around step {:.6e}",
                lo.step
            )));
        }
        let step = interpolate(&lo, &hi);
        let trial = eval(step)?;
        evaluations += 1;
        let cur = Point {
            step,
            value: trial.value,
            slope: trial.slope,
        };
        let overshoots = !cur.finite() || cur.value > phi0 + config.delta * step * dphi0 + noise;
        if overshoots || cur.value > lo.value + noise {
            hi = cur;
        } else {
            let acceptable = sufficient_decrease(&cur, phi0, dphi0, config.delta);
            if acceptable && cur.slope.abs() <= -config.sigma * dphi0 {
                return Ok(LineSearchOutcome {
                    step,
                    trial,
                    evaluations,
                });
            }
            if cur.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    Err(Error::LineSearch(format!(
        "zoom did not converge in {MAX_LINE_SEARCH_ITERS} iterations"
    )))
}

/// Cubic interpolation minimiser, kept at least 10% of the bracket away from
/// both ends; bisection when the cubic is unusable.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = if lo.step < hi.step { (lo, hi) } else { (hi, lo) };
    let width = b.step - a.step;
    let (min, max) = (a.step + 0.1 * width, b.step - 0.1 * width);
    let mid = 0.5 * (a.step + b.step);
    if !(lo.finite() && hi.finite()) {
        return mid;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = disc.sqrt();
    let t = b.step - width * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    if t.is_finite() && t >= min && t <= max {
        t
    } else {
        mid
    }
}
