//! Benchmark objectives and reproducible random points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::project_stiefel;
use crate::linalg::{check_dims, inner, sym_unchecked, DenseMatrix, TridiagMatrix};
use crate::model::SmoothObjective;

/// Nonlinear eigenvalue energy from a 1-D electronic-structure toy model:
/// `f(X) = (1/2) tr(X^T L X) + (alpha/4) rho^T L^{-1} rho`, `rho = diag(X X^T)`,
/// with `L` the Dirichlet Laplacian stencil.
#[derive(Debug, Clone)]
pub struct NleigProblem {
    n: usize,
    p: usize,
    alpha: f64,
    laplacian: TridiagMatrix,
}

impl NleigProblem {
    pub fn new(n: usize, p: usize, alpha: f64) -> Result<Self> {
        if p == 0 || n < p {
            return Err(Error::invalid("nleig_make", format!("need n >= p >= 1, got n={n}, p={p}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid("nleig_make", format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self {
            n,
            p,
            alpha,
            laplacian: TridiagMatrix::laplacian(n)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn laplacian(&self) -> &TridiagMatrix {
        &self.laplacian
    }

    /// Row sums of squares: `diag(X D^T)` for `D = X`, generalised to two factors.
    fn diag_outer(x: &DenseMatrix, d: &DenseMatrix) -> Vec<f64> {
        (0..x.nrows()).map(|i| x.row(i).dot(&d.row(i))).collect()
    }

    /// `Diag(v) M`.
    fn scale_rows(v: &[f64], m: &DenseMatrix) -> DenseMatrix {
        let mut out = m.clone();
        for (i, s) in v.iter().enumerate() {
            out.row_mut(i).scale_mut(*s);
        }
        out
    }

    /// `L^{-1} rho_X`.
    fn potential(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.laplacian.solve(&Self::diag_outer(x, x))
    }
}

impl SmoothObjective for NleigProblem {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    fn value(&self, x: &DenseMatrix) -> Result<f64> {
        self.value_and_gradient(x).map(|(v, _)| v)
    }

    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.value_and_gradient(x).map(|(_, g)| g)
    }

    /// `grad f = L X + alpha Diag(L^{-1} rho) X`.
    fn value_and_gradient(&self, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        check_dims("nleig", x, (self.n, self.p))?;
        let lx = self.laplacian.apply(x);
        let mut value = 0.5 * inner(x, &lx);
        let mut grad = lx;
        if self.alpha != 0.0 {
            let rho = Self::diag_outer(x, x);
            let pot = self.laplacian.solve(&rho)?;
            value += 0.25 * self.alpha * rho.iter().zip(&pot).map(|(a, b)| a * b).sum::<f64>();
            grad += Self::scale_rows(&pot, x) * self.alpha;
        }
        Ok((value, grad))
    }

    /// `L D + alpha Diag(L^{-1} rho) D + alpha Diag(L^{-1} diag(X D^T + D X^T)) X`.
    fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims("nleig", x, (self.n, self.p))?;
        check_dims("nleig", d, (self.n, self.p))?;
        let mut out = self.laplacian.apply(d);
        if self.alpha != 0.0 {
            let pot = self.potential(x)?;
            let drho: Vec<f64> = Self::diag_outer(x, d).into_iter().map(|v| 2.0 * v).collect();
            let dpot = self.laplacian.solve(&drho)?;
            out += (Self::scale_rows(&pot, d) + Self::scale_rows(&dpot, x)) * self.alpha;
        }
        Ok(out)
    }

    fn has_hess_vec(&self) -> bool {
        true
    }
}

pub fn nleig_make(n: usize, p: usize, alpha: f64) -> Result<NleigProblem> {
    NleigProblem::new(n, p, alpha)
}

/// Brockett cost `f(X) = (1/2) tr(X^T B X C)` with symmetric `B`, `C`.
#[derive(Debug, Clone)]
pub struct BrockettProblem {
    b: DenseMatrix,
    c: DenseMatrix,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl BrockettProblem {
    pub fn new(b: DenseMatrix, c: DenseMatrix) -> Result<Self> {
        if !b.is_square() || !c.is_square() || b.nrows() < c.nrows() || c.nrows() == 0 {
            return Err(Error::invalid(
                "brockett_make",
                format!("need square B (n x n), C (p x p) with n >= p >= 1, got {:?} and {:?}", b.shape(), c.shape()),
            ));
        }
        for (what, m) in [("B", &b), ("C", &c)] {
            crate::linalg::ensure_finite("brockett_make", m)?;
            let asym = (m - m.transpose()).norm();
            if asym > SYMMETRY_TOL * (1.0 + m.norm()) {
                return Err(Error::NotSymmetric {
                    what: if what == "B" { "Brockett B" } else { "Brockett C" },
                    asymmetry: asym,
                });
            }
        }
        Ok(Self { b, c })
    }

    /// `B = sym(Z1)`, `C = sym(Z2)` with standard normal `Z1`, `Z2`.
    pub fn random(n: usize, p: usize, seed: u64) -> Result<Self> {
        if p == 0 || n < p {
            return Err(Error::invalid("brockett_make", format!("need n >= p >= 1, got n={n}, p={p}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = sym_unchecked(&gaussian(&mut rng, n, n));
        let c = sym_unchecked(&gaussian(&mut rng, p, p));
        Self::new(b, c)
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }
}

impl SmoothObjective for BrockettProblem {
    fn dims(&self) -> (usize, usize) {
        (self.b.nrows(), self.c.nrows())
    }

    fn value(&self, x: &DenseMatrix) -> Result<f64> {
        self.value_and_gradient(x).map(|(v, _)| v)
    }

    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims("brockett", x, self.dims())?;
        Ok(&self.b * x * &self.c)
    }

    fn value_and_gradient(&self, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        let g = self.gradient(x)?;
        Ok((0.5 * inner(x, &g), g))
    }

    fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims("brockett", x, self.dims())?;
        self.gradient(d)
    }

    fn has_hess_vec(&self) -> bool {
        true
    }
}

pub fn brockett_make(b: DenseMatrix, c: DenseMatrix) -> Result<BrockettProblem> {
    BrockettProblem::new(b, c)
}

/// `f = const`; every derivative vanishes.
#[derive(Debug, Clone)]
pub struct ConstantObjective {
    n: usize,
    p: usize,
    value: f64,
}

impl ConstantObjective {
    pub fn new(n: usize, p: usize, value: f64) -> Self {
        Self { n, p, value }
    }
}

impl SmoothObjective for ConstantObjective {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.p)
    }
    fn value(&self, x: &DenseMatrix) -> Result<f64> {
        check_dims("constant", x, (self.n, self.p))?;
        Ok(self.value)
    }
    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims("constant", x, (self.n, self.p))?;
        Ok(DenseMatrix::zeros(self.n, self.p))
    }
    fn hess_vec(&self, x: &DenseMatrix, _d: &DenseMatrix) -> Result<DenseMatrix> {
        self.gradient(x)
    }
    fn has_hess_vec(&self) -> bool {
        true
    }
}

/// `f(X) = <C, X>`.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    c: DenseMatrix,
}

impl LinearObjective {
    pub fn new(c: DenseMatrix) -> Self {
        Self { c }
    }
}

impl SmoothObjective for LinearObjective {
    fn dims(&self) -> (usize, usize) {
        self.c.shape()
    }
    fn value(&self, x: &DenseMatrix) -> Result<f64> {
        check_dims("linear", x, self.c.shape())?;
        Ok(inner(&self.c, x))
    }
    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims("linear", x, self.c.shape())?;
        Ok(self.c.clone())
    }
    fn hess_vec(&self, x: &DenseMatrix, _d: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims("linear", x, self.c.shape())?;
        Ok(DenseMatrix::zeros(self.c.nrows(), self.c.ncols()))
    }
    fn has_hess_vec(&self) -> bool {
        true
    }
}

/// `f(X) = (1/2) ||X||_F^2`: identity Hessian, `grad f(X) = X`.
#[derive(Debug, Clone)]
pub struct HalfSquaredNorm {
    n: usize,
    p: usize,
}

impl HalfSquaredNorm {
    pub fn new(n: usize, p: usize) -> Self {
        Self { n, p }
    }
}

impl SmoothObjective for HalfSquaredNorm {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.p)
    }
    fn value(&self, x: &DenseMatrix) -> Result<f64> {
        check_dims("half_squared_norm", x, (self.n, self.p))?;
        Ok(0.5 * x.norm_squared())
    }
    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims("half_squared_norm", x, (self.n, self.p))?;
        Ok(x.clone())
    }
    fn hess_vec(&self, _x: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims("half_squared_norm", d, (self.n, self.p))?;
        Ok(d.clone())
    }
    fn has_hess_vec(&self) -> bool {
        true
    }
}

/// Seeded request for a random point on the Stiefel manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSpec {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl RandomSpec {
    pub fn new(n: usize, p: usize, seed: u64) -> Result<Self> {
        if p == 0 || n < p {
            return Err(Error::invalid("RandomSpec", format!("need n >= p >= 1, got n={n}, p={p}")));
        }
        Ok(Self { n, p, seed })
    }
}

/// Standard normal entries drawn in row-major order.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

const RANDOM_STIEFEL_ATTEMPTS: u64 = 4;

/// Standard normal matrix projected onto the manifold; deterministic in the seed.
pub fn random_stiefel(spec: RandomSpec) -> Result<DenseMatrix> {
    let RandomSpec { n, p, seed } = spec;
    if p == 0 || n < p {
        return Err(Error::invalid("random_stiefel", format!("need n >= p >= 1, got n={n}, p={p}")));
    }
    let mut last_err = None;
    for attempt in 0..RANDOM_STIEFEL_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        match project_stiefel(&gaussian(&mut rng, n, p)) {
            Ok(x) => return Ok(x),
            Err(e @ Error::DegenerateProjection { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}
