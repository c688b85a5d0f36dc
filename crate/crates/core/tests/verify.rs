mod common;

use common::{normal, stiefel};
use expen::prelude::*;
use expen::verify::{
    assemble_hessian, check_objective_gradient, fd_gradient_check, fd_hessvec_check, inner_identity_check,
    selfadjoint_check, spectrum_correspondence, strict_saddle_check, strict_saddle_check_dims, MAX_ASSEMBLY_DIM,
};

#[test]
fn reports_are_deterministic_given_a_seed() {
    let model = ExPenModel::new(NleigProblem::new(8, 3, 1.0).unwrap(), 2.0).unwrap();
    let x = normal(8, 3, 1) * 0.4;
    assert_eq!(check_objective_gradient(&model, &x, 6, 9).unwrap(), check_objective_gradient(&model, &x, 6, 9).unwrap());
    assert_eq!(inner_identity_check(&model, 10, 4).unwrap(), inner_identity_check(&model, 10, 4).unwrap());
    assert_eq!(selfadjoint_check(&x, 10, 2).unwrap(), selfadjoint_check(&x, 10, 2).unwrap());
}

#[test]
fn smooth_part_gradient_of_linear_objective_is_near_exact() {
    let c = normal(7, 3, 5);
    let model = ExPenModel::new(LinearObjective::new(c), 1.0).unwrap();
    let x = stiefel(7, 3, 6);
    let r = fd_gradient_check(|y| model.smooth_value(y), |y| model.smooth_grad(y), &x, 10, 1).unwrap();
    assert!(r.max_rel_error <= 1e-9, "{r}");
}

#[test]
fn corrupted_oracles_fail() {
    let model = ExPenModel::new(BrockettProblem::random(6, 3, 2).unwrap(), 2.0).unwrap();
    let x = normal(6, 3, 3) * 0.5;
    let grad = fd_gradient_check(|y| model.value(y), |y| Ok(model.gradient(y)? * 2.0), &x, 5, 0).unwrap();
    assert!(!grad.passed);
    let hess = fd_hessvec_check(|y| model.gradient(y), |y, d| Ok(model.hess_vec(y, d)? + d * 1e-2), &x, 5, 0).unwrap();
    assert!(!hess.passed);
}

#[test]
fn brockett_hessvec_is_exact_under_differencing() {
    let f = BrockettProblem::random(6, 3, 8).unwrap();
    let x = normal(6, 3, 9);
    let r = fd_hessvec_check(|y| f.gradient(y), |y, d| f.hess_vec(y, d), &x, 10, 3).unwrap();
    assert!(r.max_rel_error <= 1e-8, "{r}");
}

#[test]
fn assembled_hessian_of_constant_objective_at_origin() {
    let beta = 2.25;
    let model = ExPenModel::new(ConstantObjective::new(4, 3, 1.0), beta).unwrap();
    let h = assemble_hessian(&model, &DenseMatrix::zeros(4, 3)).unwrap();
    assert!((h.matrix + DenseMatrix::identity(12, 12) * beta).norm() < 1e-15);
}

#[test]
fn assembly_size_guard() {
    let model = ExPenModel::new(ConstantObjective::new(MAX_ASSEMBLY_DIM + 1, 1, 0.0), 1.0).unwrap();
    let x = DenseMatrix::zeros(MAX_ASSEMBLY_DIM + 1, 1);
    assert!(matches!(assemble_hessian(&model, &x), Err(Error::TooLarge { .. })));
}

#[test]
fn constant_objective_spectrum_is_zero_plus_two_beta() {
    let (n, p, beta) = (5, 2, 3.0);
    let model = ExPenModel::new(ConstantObjective::new(n, p, 4.0), beta).unwrap();
    let r = spectrum_correspondence(&model, &stiefel(n, p, 1)).unwrap();
    assert!(r.check.passed);
    let tangent_dim = n * p - p * (p + 1) / 2;
    assert_eq!(r.tangent_eigenvalues.len(), tangent_dim);
    assert!(r.tangent_eigenvalues.iter().all(|l| l.abs() < 1e-12));
    assert_eq!(r.unmatched.len(), p * (p + 1) / 2);
    assert!(r.unmatched.iter().all(|l| (l - 2.0 * beta).abs() < 1e-12));
    assert!(r.normal_above_tangent);
}

#[test]
fn spectrum_requires_a_stationary_point() {
    let model = ExPenModel::new(BrockettProblem::random(5, 2, 1).unwrap(), 5.0).unwrap();
    assert!(matches!(
        spectrum_correspondence(&model, &stiefel(5, 2, 3)),
        Err(Error::NotStationary { .. })
    ));
}

#[test]
fn strict_saddle_examples() {
    let r = strict_saddle_check(24.0).unwrap();
    assert!((r.lambda_min + 24.0).abs() <= 1e-10 * 24.0);
    assert_eq!(r.bound, -1.0);
    assert!(r.bound_holds());
    let r = strict_saddle_check_dims(10.0, 3, 2).unwrap();
    assert!((r.lambda_min + 10.0).abs() <= 1e-10);
    assert!(r.check.passed);
}
