//! Numerical oracles for the closed-form derivatives and the first- and
//! second-order relationships between the penalty and the constrained
//! problem. Every check is deterministic given its seed.

use std::fmt;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{feasibility, riemannian_grad, riemannian_hess_vec, tangent_project_unchecked, FEASIBLE_TOL};
use crate::linalg::{check_dims, inner, DenseMatrix};
use crate::model::{inner_identity_sides, jx_apply, ExPenModel, SmoothObjective};
use crate::problems::{gaussian, ConstantObjective};

/// Relative tolerance for finite-difference gradient checks.
pub const FD_GRADIENT_TOL: f64 = 1e-5;
/// Relative tolerance for finite-difference Hessian-vector checks.
pub const FD_HESSVEC_TOL: f64 = 1e-4;
/// Relative asymmetry allowed in an assembled Hessian.
pub const HESSIAN_ASYMMETRY_TOL: f64 = 1e-8;
/// Largest `n * p` for which the Hessian is materialised.
pub const MAX_ASSEMBLY_DIM: usize = 2000;
/// Images shorter than this are dropped when building a tangent basis.
pub const BASIS_DROP_TOL: f64 = 1e-10;
/// `||grad f(X*)||_F` above which a point is not treated as stationary.
pub const STATIONARY_TOL: f64 = 1e-8;
pub const SPECTRUM_TOL: f64 = 1e-6;
pub const STRICT_SADDLE_TOL: f64 = 1e-10;
pub const INNER_IDENTITY_TOL: f64 = 1e-10;
pub const SELFADJOINT_TOL: f64 = 1e-12;
pub const HESSIAN_SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub samples: usize,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, max_rel_error: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.into(),
            max_rel_error,
            tolerance,
            passed: max_rel_error <= tolerance,
            samples,
        }
    }

    /// Writes the report as a structured log line and returns it.
    pub fn logged(self) -> Self {
        log::info!("{self}");
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} max_rel_error={:.3e} tolerance={:.1e} samples={} result={}",
            self.name,
            self.max_rel_error,
            self.tolerance,
            self.samples,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

fn random_unit<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    let mut d = gaussian(rng, rows, cols);
    let norm = d.norm();
    d /= norm;
    d
}

/// Central-difference step for a point of size `||X||_F`.
pub fn fd_step(x: &DenseMatrix) -> f64 {
    1e-6 * (1.0 + x.norm())
}

/// Compares `<gradient(X), E>` with central differences of `value` along
/// random unit directions `E`. Errors are relative to `||gradient(X)||_F`.
pub fn fd_gradient_check<V, G>(value: V, gradient: G, x: &DenseMatrix, samples: usize, seed: u64) -> Result<CheckReport>
where
    V: Fn(&DenseMatrix) -> Result<f64>,
    G: Fn(&DenseMatrix) -> Result<DenseMatrix>,
{
    let (n, p) = x.shape();
    let g = gradient(x)?;
    check_dims("fd_gradient_check", &g, (n, p))?;
    let scale = g.norm();
    let t = fd_step(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let e = random_unit(&mut rng, n, p);
        let fd = (value(&(x + &e * t))? - value(&(x - &e * t))?) / (2.0 * t);
        let an = inner(&g, &e);
        let err = (fd - an).abs();
        let rel = if scale > 0.0 { err / scale } else { err };
        worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
    }
    Ok(CheckReport::new("fd_gradient", worst, FD_GRADIENT_TOL, samples).logged())
}

/// Compares `hess_vec(X, D)` with central differences of `gradient` along
/// random unit directions `D`.
pub fn fd_hessvec_check<G, H>(gradient: G, hess_vec: H, x: &DenseMatrix, samples: usize, seed: u64) -> Result<CheckReport>
where
    G: Fn(&DenseMatrix) -> Result<DenseMatrix>,
    H: Fn(&DenseMatrix, &DenseMatrix) -> Result<DenseMatrix>,
{
    let (n, p) = x.shape();
    let t = fd_step(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let d = random_unit(&mut rng, n, p);
        let hv = hess_vec(x, &d)?;
        check_dims("fd_hessvec_check", &hv, (n, p))?;
        let fd = (gradient(&(x + &d * t))? - gradient(&(x - &d * t))?) / (2.0 * t);
        let denom = hv.norm().max(fd.norm());
        let err = (fd - &hv).norm();
        let rel = if denom > 0.0 { err / denom } else { err };
        worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
    }
    Ok(CheckReport::new("fd_hessvec", worst, FD_HESSVEC_TOL, samples).logged())
}

pub fn check_objective_gradient<F: SmoothObjective + ?Sized>(
    obj: &F,
    x: &DenseMatrix,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_dims("check_objective_gradient", x, obj.dims())?;
    fd_gradient_check(|y| obj.value(y), |y| obj.gradient(y), x, samples, seed)
}

pub fn check_objective_hessvec<F: SmoothObjective + ?Sized>(
    obj: &F,
    x: &DenseMatrix,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_dims("check_objective_hessvec", x, obj.dims())?;
    if !obj.has_hess_vec() {
        return Err(Error::MissingHessian);
    }
    fd_hessvec_check(|y| obj.gradient(y), |y, d| obj.hess_vec(y, d), x, samples, seed)
}

/// `|<D1, H D2> - <D2, H D1>|` relative to `||D1|| ||H D2|| + ||D2|| ||H D1||`.
pub fn hessian_symmetry_check<F: SmoothObjective + ?Sized>(
    obj: &F,
    x: &DenseMatrix,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let (n, p) = obj.dims();
    check_dims("hessian_symmetry_check", x, (n, p))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let d1 = random_unit(&mut rng, n, p);
        let d2 = random_unit(&mut rng, n, p);
        let h1 = obj.hess_vec(x, &d1)?;
        let h2 = obj.hess_vec(x, &d2)?;
        let scale = h2.norm() + h1.norm();
        let err = (inner(&d1, &h2) - inner(&d2, &h1)).abs();
        worst = worst.max(if scale > 0.0 { err / scale } else { err });
    }
    Ok(CheckReport::new("hessian_symmetry", worst, HESSIAN_SYMMETRY_TOL, samples).logged())
}

/// Dense Hessian in column-major vectorisation (`vec(X)[i + j n] = X[i, j]`).
#[derive(Debug, Clone)]
pub struct AssembledHessian {
    /// Symmetrised.
    pub matrix: DenseMatrix,
    /// `||H - H^T||_F / ||H||_F` before symmetrisation.
    pub asymmetry: f64,
}

impl AssembledHessian {
    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_eigenvalues(self.matrix.clone())
    }
}

fn sorted_eigenvalues(m: DenseMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn assemble_hessian<F: SmoothObjective + ?Sized>(obj: &F, x: &DenseMatrix) -> Result<AssembledHessian> {
    let (n, p) = obj.dims();
    check_dims("assemble_hessian", x, (n, p))?;
    let dim = n * p;
    if dim > MAX_ASSEMBLY_DIM {
        return Err(Error::TooLarge {
            what: "Hessian dimension n*p",
            size: dim,
            limit: MAX_ASSEMBLY_DIM,
        });
    }
    if !obj.has_hess_vec() {
        return Err(Error::MissingHessian);
    }
    let mut raw = DenseMatrix::zeros(dim, dim);
    let mut basis = DenseMatrix::zeros(n, p);
    for col in 0..dim {
        basis.as_mut_slice()[col] = 1.0;
        let hv = obj.hess_vec(x, &basis)?;
        raw.set_column(col, &nalgebra::DVector::from_column_slice(hv.as_slice()));
        basis.as_mut_slice()[col] = 0.0;
    }
    let norm = raw.norm();
    let asymmetry = if norm > 0.0 {
        (&raw - raw.transpose()).norm() / norm
    } else {
        0.0
    };
    if asymmetry > HESSIAN_ASYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            what: "assembled Hessian",
            asymmetry,
        });
    }
    let matrix = (&raw + raw.transpose()) * 0.5;
    Ok(AssembledHessian { matrix, asymmetry })
}

/// Orthonormal basis of the tangent space at `x`, built by Gram-Schmidt on the
/// tangent projections of the canonical basis matrices.
pub fn tangent_basis(x: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
    let feas = feasibility(x);
    if feas > FEASIBLE_TOL {
        return Err(Error::NotFeasible {
            op: "tangent_basis",
            feasibility: feas,
        });
    }
    let (n, p) = x.shape();
    let mut basis: Vec<DenseMatrix> = Vec::with_capacity(n * p);
    let mut e = DenseMatrix::zeros(n, p);
    for idx in 0..n * p {
        e.as_mut_slice()[idx] = 1.0;
        let mut v = tangent_project_unchecked(x, &e);
        e.as_mut_slice()[idx] = 0.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > BASIS_DROP_TOL {
            basis.push(v / norm);
        }
    }
    Ok(basis)
}

/// Riemannian Hessian of `obj` at `x` in the basis `basis` (symmetrised).
pub fn riemannian_hessian_matrix<F: SmoothObjective + ?Sized>(
    obj: &F,
    x: &DenseMatrix,
    basis: &[DenseMatrix],
) -> Result<DenseMatrix> {
    let m = basis.len();
    let mut r = DenseMatrix::zeros(m, m);
    for (b, db) in basis.iter().enumerate() {
        let hv = riemannian_hess_vec(obj, x, db)?;
        for (a, da) in basis.iter().enumerate() {
            r[(a, b)] = inner(da, &hv);
        }
    }
    Ok((&r + r.transpose()) * 0.5)
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub check: CheckReport,
    /// Eigenvalues of the Riemannian Hessian, ascending.
    pub tangent_eigenvalues: Vec<f64>,
    /// Eigenvalues of the penalty Hessian, ascending.
    pub penalty_eigenvalues: Vec<f64>,
    /// Penalty eigenvalues left after matching, ascending. There are
    /// `p(p+1)/2` of them.
    pub unmatched: Vec<f64>,
    /// `min(unmatched) > max(tangent_eigenvalues)`; expected once beta is large.
    pub normal_above_tangent: bool,
}

/// Checks that every eigenvalue of the Riemannian Hessian at the stationary
/// point `x_star` appears in the spectrum of the penalty Hessian there.
///
/// Matching is greedy nearest-eigenvalue without replacement, error
/// `|lambda - mu| / (1 + |lambda|)`.
pub fn spectrum_correspondence<F: SmoothObjective>(
    model: &ExPenModel<F>,
    x_star: &DenseMatrix,
) -> Result<SpectrumReport> {
    let obj = model.objective();
    check_dims("spectrum_correspondence", x_star, obj.dims())?;
    let grad_norm = riemannian_grad(obj, x_star)?.norm();
    if grad_norm > STATIONARY_TOL {
        return Err(Error::NotStationary { grad_norm });
    }
    let penalty = assemble_hessian(model, x_star)?;
    let penalty_eigenvalues = penalty.eigenvalues();

    let basis = tangent_basis(x_star)?;
    let tangent_eigenvalues = sorted_eigenvalues(riemannian_hessian_matrix(obj, x_star, &basis)?);

    let mut used = vec![false; penalty_eigenvalues.len()];
    let mut worst = 0.0_f64;
    for &lambda in &tangent_eigenvalues {
        let (idx, mu) = penalty_eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs()))
            .map(|(i, mu)| (i, *mu))
            .expect("penalty spectrum is at least as large as the tangent one");
        used[idx] = true;
        worst = worst.max((lambda - mu).abs() / (1.0 + lambda.abs()));
    }
    let unmatched: Vec<f64> = penalty_eigenvalues
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(v, _)| *v)
        .collect();
    let top_tangent = tangent_eigenvalues.last().copied().unwrap_or(f64::NEG_INFINITY);
    let normal_above_tangent = unmatched.iter().all(|v| *v > top_tangent);

    Ok(SpectrumReport {
        check: CheckReport::new("spectrum_correspondence", worst, SPECTRUM_TOL, tangent_eigenvalues.len()).logged(),
        tangent_eigenvalues,
        penalty_eigenvalues,
        unmatched,
        normal_above_tangent,
    })
}

#[derive(Debug, Clone)]
pub struct StrictSaddleReport {
    /// Error is `|lambda_min + beta| / max(1, beta)`.
    pub check: CheckReport,
    pub lambda_min: f64,
    /// `-beta / 24`
    pub bound: f64,
}

impl StrictSaddleReport {
    pub fn bound_holds(&self) -> bool {
        self.lambda_min <= self.bound
    }
}

/// With `f = 0`, `X = 0` is an infeasible stationary point of the penalty and
/// `hess h(0) = -beta I`, so it cannot be a second-order stationary point.
pub fn strict_saddle_check(beta: f64) -> Result<StrictSaddleReport> {
    strict_saddle_check_dims(beta, 3, 2)
}

pub fn strict_saddle_check_dims(beta: f64, n: usize, p: usize) -> Result<StrictSaddleReport> {
    let model = ExPenModel::new(ConstantObjective::new(n, p, 0.0), beta)?;
    let x = DenseMatrix::zeros(n, p);
    let grad = model.gradient(&x)?;
    if grad.norm() != 0.0 {
        return Err(Error::NotStationary { grad_norm: grad.norm() });
    }
    let lambda_min = assemble_hessian(&model, &x)?.eigenvalues()[0];
    let err = (lambda_min + beta).abs() / beta.max(1.0);
    Ok(StrictSaddleReport {
        check: CheckReport::new("strict_saddle", err, STRICT_SADDLE_TOL, 1).logged(),
        lambda_min,
        bound: -beta / 24.0,
    })
}

/// Random point with `||X||_2` spread around 1, so that both sides of the
/// identity are generically nonzero.
fn random_point<R: Rng>(rng: &mut R, n: usize, p: usize) -> DenseMatrix {
    let scale = rng.random_range(0.5..1.5) / (n as f64).sqrt();
    gaussian(rng, n, p) * scale
}

/// `<X (X^T X - I), grad g(X)> = -(3/2) <(X^T X - I)^2, sym(X^T G(X))>` on
/// random `X`, with `grad_g` supplied by the caller (a negative control swaps
/// in a corrupted one).
pub fn inner_identity_check_with<F, Q>(
    obj: &F,
    grad_g: Q,
    samples: usize,
    seed: u64,
) -> Result<CheckReport>
where
    F: SmoothObjective + ?Sized,
    Q: Fn(&DenseMatrix) -> Result<DenseMatrix>,
{
    let (n, p) = obj.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x = random_point(&mut rng, n, p);
        worst = worst.max(inner_identity_error(obj, &grad_g, &x)?);
    }
    Ok(CheckReport::new("inner_identity", worst, INNER_IDENTITY_TOL, samples).logged())
}

/// Relative mismatch of the two sides at one point, normalised by
/// `max(|lhs|, |rhs|, 1e-6 ||X (X^T X - I)|| ||grad g||)`.
pub fn inner_identity_error<F, Q>(obj: &F, grad_g: &Q, x: &DenseMatrix) -> Result<f64>
where
    F: SmoothObjective + ?Sized,
    Q: Fn(&DenseMatrix) -> Result<DenseMatrix>,
{
    let g = obj.gradient(&crate::model::apen_map(x))?;
    let gg = grad_g(x)?;
    let (lhs, rhs, cs) = inner_identity_sides(x, &gg, &g);
    let scale = lhs.abs().max(rhs.abs()).max(1e-6 * cs);
    let err = (lhs - rhs).abs();
    Ok(if scale > 0.0 { err / scale } else { err })
}

pub fn inner_identity_check<F: SmoothObjective>(model: &ExPenModel<F>, samples: usize, seed: u64) -> Result<CheckReport> {
    inner_identity_check_with(model.objective(), |x| model.smooth_grad(x), samples, seed)
}

/// `|<J_X(W), Z> - <W, J_X(Z)>| <= tol ||W|| ||Z|| (1 + ||X||^2)` over random
/// `W`, `Z`, with the Jacobian action supplied by the caller.
pub fn selfadjoint_check_with<J>(jx: J, x: &DenseMatrix, samples: usize, seed: u64) -> Result<CheckReport>
where
    J: Fn(&DenseMatrix, &DenseMatrix) -> Result<DenseMatrix>,
{
    let (n, p) = x.shape();
    let xs = 1.0 + x.norm_squared();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let w = gaussian(&mut rng, n, p);
        let z = gaussian(&mut rng, n, p);
        let err = (inner(&jx(x, &w)?, &z) - inner(&w, &jx(x, &z)?)).abs();
        worst = worst.max(err / (w.norm() * z.norm() * xs));
    }
    Ok(CheckReport::new("selfadjoint", worst, SELFADJOINT_TOL, samples).logged())
}

pub fn selfadjoint_check(x: &DenseMatrix, samples: usize, seed: u64) -> Result<CheckReport> {
    selfadjoint_check_with(jx_apply, x, samples, seed)
}
