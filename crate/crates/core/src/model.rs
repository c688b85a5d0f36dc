//! The exact penalty `h(X) = f(X A(X)) + (beta/4) ||X^T X - I||_F^2` with
//! `A(X) = (3/2) I - (1/2) X^T X`, and its first and second derivatives in
//! closed form.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{check_dims, gram_defect, inner, sym_unchecked, DenseMatrix};

/// Oracle bundle for a smooth objective `f : R^{n x p} -> R`.
///
/// Implementations must be deterministic and reentrant.
pub trait SmoothObjective {
    fn dims(&self) -> (usize, usize);

    fn value(&self, x: &DenseMatrix) -> Result<f64>;

    /// Euclidean gradient.
    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix>;

    fn value_and_gradient(&self, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }

    /// Euclidean Hessian applied to `d`. Objectives without second-order
    /// information keep the default, which fails with [`Error::MissingHessian`].
    fn hess_vec(&self, _x: &DenseMatrix, _d: &DenseMatrix) -> Result<DenseMatrix> {
        Err(Error::MissingHessian)
    }

    fn has_hess_vec(&self) -> bool {
        false
    }
}

macro_rules! forward_objective {
    ($($ptr:ty),*) => {$(
        impl<T: SmoothObjective + ?Sized> SmoothObjective for $ptr {
            fn dims(&self) -> (usize, usize) {
                (**self).dims()
            }
            fn value(&self, x: &DenseMatrix) -> Result<f64> {
                (**self).value(x)
            }
            fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
                (**self).gradient(x)
            }
            fn value_and_gradient(&self, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
                (**self).value_and_gradient(x)
            }
            fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
                (**self).hess_vec(x, d)
            }
            fn has_hess_vec(&self) -> bool {
                (**self).has_hess_vec()
            }
        }
    )*};
}

forward_objective!(&T, Box<T>, Arc<T>);

/// `A(X) = (3/2) I_p - (1/2) X^T X`, given `X^T X`.
fn smoothing_factor(xtx: &DenseMatrix) -> DenseMatrix {
    let mut a = xtx * -0.5;
    for i in 0..a.nrows() {
        a[(i, i)] += 1.5;
    }
    a
}

/// The smoothing map `X -> X A(X)`.
pub fn apen_map(x: &DenseMatrix) -> DenseMatrix {
    x * smoothing_factor(&x.tr_mul(x))
}

/// Jacobian of [`apen_map`] at `x` applied to `d`: `D A(X) - X sym(D^T X)`.
///
/// The map is self-adjoint for every `x`.
pub fn jx_apply(x: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    check_dims("jx_apply", d, x.shape())?;
    let a = smoothing_factor(&x.tr_mul(x));
    Ok(jx_with(x, &a, d))
}

fn jx_with(x: &DenseMatrix, a: &DenseMatrix, d: &DenseMatrix) -> DenseMatrix {
    d * a - x * sym_unchecked(&d.tr_mul(x))
}

/// Intermediates shared by the value, gradient and Hessian formulas.
struct Workspace {
    /// `X^T X - I`
    defect: DenseMatrix,
    /// `A(X)`
    a: DenseMatrix,
    /// `X A(X)`
    y: DenseMatrix,
}

impl Workspace {
    fn new(x: &DenseMatrix) -> Self {
        let xtx = x.tr_mul(x);
        let a = smoothing_factor(&xtx);
        let y = x * &a;
        let mut defect = xtx;
        for i in 0..defect.nrows() {
            defect[(i, i)] -= 1.0;
        }
        Self { defect, a, y }
    }
}

/// Penalty model: a smooth objective together with the penalty parameter.
#[derive(Debug, Clone)]
pub struct ExPenModel<F> {
    objective: F,
    beta: f64,
}

impl<F: SmoothObjective> ExPenModel<F> {
    pub fn new(objective: F, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(
                "ExPenModel::new",
                format!("beta must be positive and finite, got {beta}"),
            ));
        }
        Ok(Self { objective, beta })
    }

    /// Uses the heuristic `beta = ||grad f(X0)||_F / 10`.
    pub fn with_default_beta(objective: F, x0: &DenseMatrix) -> Result<Self> {
        let beta = default_beta(&objective, x0)?;
        Self::new(objective, beta)
    }

    pub fn objective(&self) -> &F {
        &self.objective
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dims(&self) -> (usize, usize) {
        self.objective.dims()
    }

    fn check(&self, op: &'static str, x: &DenseMatrix) -> Result<()> {
        check_dims(op, x, self.objective.dims())
    }

    /// `g(X) = f(X A(X))`, the penalty-free part of `h`.
    pub fn smooth_value(&self, x: &DenseMatrix) -> Result<f64> {
        self.check("smooth_value", x)?;
        self.objective.value(&apen_map(x))
    }

    /// `grad g(X) = G A(X) - X sym(X^T G)` with `G = grad f(X A(X))`.
    pub fn smooth_grad(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check("smooth_grad", x)?;
        let ws = Workspace::new(x);
        let g = self.objective.gradient(&ws.y)?;
        Ok(smooth_grad_with(x, &ws, &g))
    }

    /// `G(X) = grad f(X A(X))`.
    pub fn inner_gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check("inner_gradient", x)?;
        self.objective.gradient(&apen_map(x))
    }

    pub fn value(&self, x: &DenseMatrix) -> Result<f64> {
        self.check("expen_value", x)?;
        let ws = Workspace::new(x);
        let fy = self.objective.value(&ws.y)?;
        Ok(fy + 0.25 * self.beta * ws.defect.norm_squared())
    }

    pub fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.value_and_gradient(x).map(|(_, g)| g)
    }

    /// One objective first-order call plus a handful of `n x p x p` products.
    pub fn value_and_gradient(&self, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        self.check("expen_grad", x)?;
        let ws = Workspace::new(x);
        let (fy, g) = self.objective.value_and_gradient(&ws.y)?;
        let value = fy + 0.25 * self.beta * ws.defect.norm_squared();
        let mut grad = smooth_grad_with(x, &ws, &g);
        grad += (x * &ws.defect) * self.beta;
        Ok((value, grad))
    }

    /// `hess h(X)[D] = J(H[J(D)]) - D sym(X^T G) - X sym(D^T G) - G sym(D^T X)
    ///                + beta (2 X sym(X^T D) + D (X^T X - I))`.
    pub fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
        self.check("expen_hess_vec", x)?;
        self.check("expen_hess_vec", d)?;
        if !self.objective.has_hess_vec() {
            return Err(Error::MissingHessian);
        }
        let ws = Workspace::new(x);
        let g = self.objective.gradient(&ws.y)?;
        let jd = jx_with(x, &ws.a, d);
        let hjd = self.objective.hess_vec(&ws.y, &jd)?;

        let mut out = jx_with(x, &ws.a, &hjd);
        out -= d * sym_unchecked(&x.tr_mul(&g));
        out -= x * sym_unchecked(&d.tr_mul(&g));
        let dtx = sym_unchecked(&d.tr_mul(x));
        out -= &g * &dtx;
        let penalty = (x * dtx) * 2.0 + d * &ws.defect;
        out += penalty * self.beta;
        Ok(out)
    }

    /// `||X^T X - I||_F`.
    pub fn feasibility(&self, x: &DenseMatrix) -> f64 {
        gram_defect(x).norm()
    }
}

fn smooth_grad_with(x: &DenseMatrix, ws: &Workspace, g: &DenseMatrix) -> DenseMatrix {
    &(g * &ws.a) - x * sym_unchecked(&x.tr_mul(g))
}

/// `||grad f(X0)||_F / 10`.
pub fn default_beta<F: SmoothObjective + ?Sized>(objective: &F, x0: &DenseMatrix) -> Result<f64> {
    check_dims("default_beta", x0, objective.dims())?;
    let beta = objective.gradient(x0)?.norm() / 10.0;
    if beta > 0.0 && beta.is_finite() {
        Ok(beta)
    } else {
        Err(Error::invalid(
            "default_beta",
            format!("||grad f(X0)||_F / 10 = {beta} is not a usable penalty parameter; pass beta explicitly"),
        ))
    }
}

impl<F: SmoothObjective> SmoothObjective for ExPenModel<F> {
    fn dims(&self) -> (usize, usize) {
        self.objective.dims()
    }
    fn value(&self, x: &DenseMatrix) -> Result<f64> {
        ExPenModel::value(self, x)
    }
    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        ExPenModel::gradient(self, x)
    }
    fn value_and_gradient(&self, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        ExPenModel::value_and_gradient(self, x)
    }
    fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
        ExPenModel::hess_vec(self, x, d)
    }
    fn has_hess_vec(&self) -> bool {
        self.objective.has_hess_vec()
    }
}

/// Inner product `<X (X^T X - I), grad g(X)>` and the closed form
/// `-(3/2) <(X^T X - I)^2, sym(X^T G)>`; the two agree for every `X`.
pub(crate) fn inner_identity_sides(
    x: &DenseMatrix,
    grad_g: &DenseMatrix,
    g: &DenseMatrix,
) -> (f64, f64, f64) {
    let defect = gram_defect(x);
    let lhs_factor = x * &defect;
    let lhs = inner(&lhs_factor, grad_g);
    let rhs = -1.5 * inner(&(&defect * &defect), &sym_unchecked(&x.tr_mul(g)));
    (lhs, rhs, lhs_factor.norm() * grad_g.norm())
}
