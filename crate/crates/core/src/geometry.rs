//! Stiefel-manifold utilities: projection, tangent spaces, Riemannian
//! derivatives, and the post-projection stationarity certificate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dims, econ_svd, gram_defect, inner, sym_unchecked, DenseMatrix};
use crate::model::{ExPenModel, SmoothObjective};

/// Relative singular-value gap below which the projection is not unique.
pub const RANK_TOL: f64 = 1e-12;
/// Largest `||X^T X - I||_F` accepted where a point on the manifold is required.
pub const FEASIBLE_TOL: f64 = 1e-8;
/// Largest `||sym(D^T X)||_F / (1 + ||D||_F)` accepted for a tangent direction.
pub const TANGENT_TOL: f64 = 1e-10;
/// Radius of the neighbourhood in which the stationarity certificate applies.
pub const CERTIFIED_RADIUS: f64 = 1.0 / 6.0;

/// `||X^T X - I_p||_F`.
pub fn feasibility(x: &DenseMatrix) -> f64 {
    gram_defect(x).norm()
}

/// Nearest point on the manifold, `U V^T` from the thin SVD.
pub fn project_stiefel(x: &DenseMatrix) -> Result<DenseMatrix> {
    let svd = econ_svd(x)?;
    let (smax, smin) = (svd.sigma_max(), svd.sigma_min());
    if !(smax > 0.0) || smin < RANK_TOL * smax {
        return Err(Error::DegenerateProjection {
            sigma_min: smin,
            sigma_max: smax,
        });
    }
    Ok(&svd.u * svd.v.transpose())
}

fn require_feasible(op: &'static str, x: &DenseMatrix) -> Result<()> {
    let feas = feasibility(x);
    if feas <= FEASIBLE_TOL {
        Ok(())
    } else {
        Err(Error::NotFeasible { op, feasibility: feas })
    }
}

/// `D - X sym(X^T D)`; `x` must lie on the manifold.
pub fn tangent_project(x: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    check_dims("tangent_project", d, x.shape())?;
    require_feasible("tangent_project", x)?;
    Ok(tangent_project_unchecked(x, d))
}

pub(crate) fn tangent_project_unchecked(x: &DenseMatrix, d: &DenseMatrix) -> DenseMatrix {
    d - x * sym_unchecked(&x.tr_mul(d))
}

/// `grad f(X) = grad_E f(X) - X sym(X^T grad_E f(X))`.
pub fn riemannian_grad<F: SmoothObjective + ?Sized>(obj: &F, x: &DenseMatrix) -> Result<DenseMatrix> {
    check_dims("riemannian_grad", x, obj.dims())?;
    require_feasible("riemannian_grad", x)?;
    let g = obj.gradient(x)?;
    Ok(tangent_project_unchecked(x, &g))
}

fn require_tangent(x: &DenseMatrix, d: &DenseMatrix) -> Result<()> {
    let residual = sym_unchecked(&d.tr_mul(x)).norm();
    if residual <= TANGENT_TOL * (1.0 + d.norm()) {
        Ok(())
    } else {
        Err(Error::NotTangent { residual })
    }
}

/// Riemannian Hessian applied to a tangent direction:
/// `P_T(hess f(X)[D] - D sym(X^T grad f(X)))`.
pub fn riemannian_hess_vec<F: SmoothObjective + ?Sized>(
    obj: &F,
    x: &DenseMatrix,
    d: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_dims("riemannian_hess", x, obj.dims())?;
    check_dims("riemannian_hess", d, obj.dims())?;
    if !obj.has_hess_vec() {
        return Err(Error::MissingHessian);
    }
    require_feasible("riemannian_hess", x)?;
    require_tangent(x, d)?;
    let g = obj.gradient(x)?;
    let hd = obj.hess_vec(x, d)?;
    let raw = hd - d * sym_unchecked(&x.tr_mul(&g));
    Ok(tangent_project_unchecked(x, &raw))
}

/// `<D, hess f(X)[D] - D sym(X^T grad f(X))>` for tangent `D`.
pub fn riemannian_hess_quadform<F: SmoothObjective + ?Sized>(
    obj: &F,
    x: &DenseMatrix,
    d: &DenseMatrix,
) -> Result<f64> {
    Ok(inner(d, &riemannian_hess_vec(obj, x, d)?))
}

/// Stationarity of the projected point, measured directly and bounded via the
/// penalty gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `||grad h(X)||_F`
    pub grad_h_norm: f64,
    /// `||X^T X - I||_F`
    pub feasibility: f64,
    /// `||grad f(P_S(X))||_F`, evaluated directly.
    pub projected_riem_grad_norm: f64,
    /// `2 ||grad h(X)||_F`
    pub certified_bound: f64,
    /// `feasibility <= 1/6`. The certificate additionally needs beta above a
    /// problem-dependent threshold that cannot be computed, so this flag is
    /// necessary but not sufficient.
    pub in_certified_region: bool,
    pub beta: f64,
}

impl StationarityReport {
    /// `feasibility <= (4 / beta) ||grad h||_F`.
    pub fn feasibility_bound_holds(&self) -> bool {
        self.feasibility <= 4.0 / self.beta * self.grad_h_norm
    }

    pub fn certificate_holds(&self) -> bool {
        self.projected_riem_grad_norm <= self.certified_bound
    }
}

pub fn stationarity_report<F: SmoothObjective>(
    model: &ExPenModel<F>,
    x: &DenseMatrix,
) -> Result<StationarityReport> {
    let grad_h_norm = model.gradient(x)?.norm();
    let feas = feasibility(x);
    let projected = project_stiefel(x)?;
    let projected_riem_grad_norm = riemannian_grad(model.objective(), &projected)?.norm();
    Ok(StationarityReport {
        grad_h_norm,
        feasibility: feas,
        projected_riem_grad_norm,
        certified_bound: 2.0 * grad_h_norm,
        in_certified_region: feas <= CERTIFIED_RADIUS,
        beta: model.beta(),
    })
}

/// Projects onto the manifold and returns the penalty decrease `h(X) - h(P_S(X))`.
pub fn postprocess<F: SmoothObjective>(
    model: &ExPenModel<F>,
    x: &DenseMatrix,
) -> Result<(DenseMatrix, f64)> {
    let projected = project_stiefel(x)?;
    let decrease = model.value(x)? - model.value(&projected)?;
    Ok((projected, decrease))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_row_major;
    use crate::problems::{random_stiefel, ConstantObjective, HalfSquaredNorm, LinearObjective, RandomSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stiefel(n: usize, p: usize, seed: u64) -> DenseMatrix {
        random_stiefel(RandomSpec::new(n, p, seed).unwrap()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let q = stiefel(5, 2, 1);
        assert!((project_stiefel(&q).unwrap() - &q).norm() < 1e-14);

        let x = DenseMatrix::from_element(1, 1, 2.0);
        assert!((project_stiefel(&x).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);

        let d = from_row_major(3, 2, &[2.0, 0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        let expect = from_row_major(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((project_stiefel(&d).unwrap() - expect).norm() < 1e-14);
    }

    #[test]
    fn projection_rejects_rank_deficient() {
        let x = from_row_major(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0]).unwrap();
        assert!(matches!(project_stiefel(&x), Err(Error::DegenerateProjection { .. })));
        assert!(matches!(
            project_stiefel(&DenseMatrix::zeros(3, 2)),
            Err(Error::DegenerateProjection { .. })
        ));
    }

    #[test]
    fn tangent_projection_examples() {
        let x = stiefel(6, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = crate::problems::gaussian(&mut rng, 6, 3);
        let t = tangent_project(&x, &raw).unwrap();
        assert!((tangent_project(&x, &t).unwrap() - &t).norm() < 1e-13);
        assert!(sym_unchecked(&t.tr_mul(&x)).norm() < 1e-12);

        let s = sym_unchecked(&crate::problems::gaussian(&mut rng, 3, 3));
        assert!(tangent_project(&x, &(&x * s)).unwrap().norm() < 1e-13);
        assert!(tangent_project(&x, &x).unwrap().norm() < 1e-13);
    }

    #[test]
    fn tangent_projection_needs_feasible_base() {
        let x = stiefel(4, 2, 5) * 1.1;
        assert!(matches!(
            tangent_project(&x, &DenseMatrix::zeros(4, 2)),
            Err(Error::NotFeasible { .. })
        ));
    }

    #[test]
    fn riemannian_grad_examples() {
        let x = stiefel(5, 2, 7);
        // grad f = X: normal, so the Riemannian gradient vanishes
        let rg = riemannian_grad(&HalfSquaredNorm::new(5, 2), &x).unwrap();
        assert!(rg.norm() < 1e-14);

        let c = DenseMatrix::from_fn(5, 2, |i, j| (i as f64 - 2.0) * (j as f64 + 0.5));
        let rg = riemannian_grad(&LinearObjective::new(c.clone()), &x).unwrap();
        let expect = &c - &x * sym_unchecked(&x.tr_mul(&c));
        assert!((rg - expect).norm() < 1e-14);
    }

    #[test]
    fn riemannian_hess_examples() {
        let x = stiefel(5, 2, 8);
        let f = HalfSquaredNorm::new(5, 2);
        assert_eq!(riemannian_hess_quadform(&f, &x, &DenseMatrix::zeros(5, 2)).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = tangent_project(&x, &crate::problems::gaussian(&mut rng, 5, 2)).unwrap();
        assert!(riemannian_hess_quadform(&f, &x, &d).unwrap().abs() < 1e-13);

        let not_tangent = &x * 1.0;
        assert!(matches!(
            riemannian_hess_quadform(&f, &x, &not_tangent),
            Err(Error::NotTangent { .. })
        ));
    }

    #[test]
    fn feasibility_examples() {
        assert!(feasibility(&stiefel(4, 3, 0)) < 1e-14);
        assert!((feasibility(&DenseMatrix::zeros(3, 2)) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(feasibility(&DenseMatrix::from_element(1, 1, 2.0)), 3.0);
    }

    #[test]
    fn report_at_feasible_stationary_point() {
        let model = ExPenModel::new(ConstantObjective::new(4, 2, 1.0), 3.0).unwrap();
        let r = stationarity_report(&model, &stiefel(4, 2, 11)).unwrap();
        assert!(r.grad_h_norm.max(r.projected_riem_grad_norm) < 1e-13);
        assert!(r.feasibility < 1e-14);
        assert!(r.in_certified_region);
    }

    #[test]
    fn postprocess_examples() {
        let model = ExPenModel::new(ConstantObjective::new(4, 2, 0.0), 5.0).unwrap();
        let x = stiefel(4, 2, 3);
        let (p, dec) = postprocess(&model, &x).unwrap();
        assert!((p - &x).norm() < 1e-14);
        assert!(dec.abs() < 1e-14);

        let y = &x * 1.05;
        let (_, dec) = postprocess(&model, &y).unwrap();
        let expect = 1.25 * feasibility(&y).powi(2);
        assert!((dec - expect).abs() < 1e-12);
    }
}
