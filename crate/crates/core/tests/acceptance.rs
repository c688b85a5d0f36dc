//! One test per acceptance criterion. Each prints a single
//! `criterion N ... PASS|FAIL` line before asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use expen::bench::{RunRecord, TABLE_HEADER, TRACE_HEADER};
use expen::linalg::inner;
use expen::prelude::*;
use expen::problems::gaussian;
use expen::verify::{
    check_objective_gradient, check_objective_hessvec, inner_identity_check, inner_identity_check_with,
    riemannian_hessian_matrix, selfadjoint_check, selfadjoint_check_with, spectrum_correspondence,
    strict_saddle_check, tangent_basis,
};

// written to the raw stderr handle so the line survives libtest's output capture
fn report(id: u32, name: &str, passed: bool, detail: String) {
    let line = format!("criterion {id} {name}: {} ({detail})\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn stiefel(n: usize, p: usize, seed: u64) -> DenseMatrix {
    random_stiefel(RandomSpec::new(n, p, seed).unwrap()).unwrap()
}

fn diag(values: &[f64]) -> DenseMatrix {
    DenseMatrix::from_diagonal(&DVector::from_column_slice(values))
}

/// Generic point with singular values spread around 1.
fn near_manifold(n: usize, p: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    stiefel(n, p, seed) + gaussian(&mut rng, n, p) * (0.2 / (n as f64).sqrt())
}

#[test]
fn criterion_1_derivative_exactness() {
    let start = Instant::now();
    let (mut grad_worst, mut hess_worst, mut all) = (0.0_f64, 0.0_f64, true);
    for (n, p) in [(8, 3), (12, 4)] {
        let nleig = ExPenModel::new(NleigProblem::new(n, p, 1.0).unwrap(), 2.0).unwrap();
        let brockett = ExPenModel::new(BrockettProblem::random(n, p, 17).unwrap(), 2.0).unwrap();
        for k in 0..10 {
            let x = near_manifold(n, p, 100 + k);
            for obj in [&nleig as &dyn SmoothObjective, &brockett as &dyn SmoothObjective] {
                let g = check_objective_gradient(obj, &x, 5, k).unwrap();
                let h = check_objective_hessvec(obj, &x, 5, k).unwrap();
                grad_worst = grad_worst.max(g.max_rel_error);
                hess_worst = hess_worst.max(h.max_rel_error);
                all &= g.passed && h.passed;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = all && secs < 10.0;
    report(1, "derivative exactness", passed, format!("grad {grad_worst:.2e}, hess_vec {hess_worst:.2e}, {secs:.2}s"));
    assert!(passed);
}

#[test]
fn criterion_2_feasible_consistency() {
    let mut worst = 0.0_f64;
    for k in 0..20 {
        let (n, p) = if k % 2 == 0 { (8, 3) } else { (12, 4) };
        let x = stiefel(n, p, 200 + k);
        let objs: [Box<dyn SmoothObjective>; 2] = [
            Box::new(NleigProblem::new(n, p, 1.0).unwrap()),
            Box::new(BrockettProblem::random(n, p, 300 + k).unwrap()),
        ];
        for f in objs {
            let rgrad = riemannian_grad(&f, &x).unwrap();
            let model = ExPenModel::new(f, 3.0).unwrap();
            let fx = model.objective().value(&x).unwrap();
            let value_err = (model.value(&x).unwrap() - fx).abs() / fx.abs().max(1.0);
            let grad_err = (model.gradient(&x).unwrap() - &rgrad).norm() / rgrad.norm().max(1.0);
            worst = worst.max(value_err).max(grad_err);
        }
    }
    let passed = worst <= 1e-12;
    report(2, "feasible consistency", passed, format!("max rel error {worst:.2e}"));
    assert!(passed);
}

#[test]
fn criterion_3_algebraic_identities() {
    let (n, p) = (9, 3);
    let mut selfadj_worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for k in 0..50 {
        let x = gaussian(&mut rng, n, p) * 0.5;
        selfadj_worst = selfadj_worst.max(selfadjoint_check(&x, 1, k).unwrap().max_rel_error);
    }
    let model = ExPenModel::new(NleigProblem::new(n, p, 1.0).unwrap(), 1.0).unwrap();
    let identity = inner_identity_check(&model, 50, 32).unwrap();

    // negative controls: A(X) applied on the wrong side of the normal term,
    // and grad g without its correction term
    let x = gaussian(&mut rng, n, p) * 0.5;
    let bad_j = selfadjoint_check_with(
        |x, d| {
            let a = DenseMatrix::identity(p, p) * 1.5 - x.tr_mul(x) * 0.5;
            Ok(d * &a - x * sym(&d.tr_mul(x)).unwrap() * &a)
        },
        &x,
        50,
        33,
    )
    .unwrap();
    let bad_grad = inner_identity_check_with(
        model.objective(),
        |x| {
            let a = DenseMatrix::identity(p, p) * 1.5 - x.tr_mul(x) * 0.5;
            Ok(model.inner_gradient(x)? * a)
        },
        50,
        34,
    )
    .unwrap();

    let passed = selfadj_worst <= 1e-12 && identity.passed && !bad_j.passed && !bad_grad.passed;
    report(
        3,
        "algebraic identities",
        passed,
        format!(
            "selfadjoint {selfadj_worst:.2e}, inner identity {:.2e}, controls {:.2e} / {:.2e}",
            identity.max_rel_error, bad_j.max_rel_error, bad_grad.max_rel_error
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_4_strict_saddle() {
    let mut passed = true;
    let mut detail = Vec::new();
    for beta in [0.5, 1.0, 7.0, 120.0] {
        let r = strict_saddle_check(beta).unwrap();
        passed &= r.check.passed && r.bound_holds();
        detail.push(format!("beta {beta}: lambda_min {:.12}", r.lambda_min));
    }
    report(4, "strict saddle", passed, detail.join(", "));
    assert!(passed);
}

/// Riemannian Newton iteration in an orthonormal tangent basis. Directions in
/// the kernel of the Hessian (the O(p) symmetry of the objective) are left out.
fn newton_polish<F: SmoothObjective>(f: &F, mut x: DenseMatrix, tol: f64) -> DenseMatrix {
    for _ in 0..10 {
        let g = riemannian_grad(f, &x).unwrap();
        if g.norm() <= tol {
            break;
        }
        let basis = tangent_basis(&x).unwrap();
        let eig = SymmetricEigen::new(riemannian_hessian_matrix(f, &x, &basis).unwrap());
        let rhs = DVector::from_iterator(basis.len(), basis.iter().map(|b| inner(b, &g)));
        let scale = eig.eigenvalues.amax();
        let coef = eig.eigenvectors.tr_mul(&rhs);
        let mut step = DVector::zeros(basis.len());
        for i in 0..basis.len() {
            let lambda = eig.eigenvalues[i];
            if lambda.abs() > 1e-10 * scale {
                step += eig.eigenvectors.column(i) * (coef[i] / lambda);
            }
        }
        let mut d = DenseMatrix::zeros(x.nrows(), x.ncols());
        for (b, c) in basis.iter().zip(step.iter()) {
            d += b * *c;
        }
        x = project_stiefel(&(&x - d)).unwrap();
    }
    x
}

#[test]
fn criterion_5_eigenvalue_correspondence() {
    let start = Instant::now();

    let brockett = BrockettProblem::new(diag(&[1.0, 2.0, 3.0, 4.0]), diag(&[2.0, 1.0])).unwrap();
    let mut minimiser = DenseMatrix::zeros(4, 2);
    minimiser[(0, 0)] = 1.0;
    minimiser[(1, 1)] = 1.0;
    let model = ExPenModel::new(brockett, 10.0).unwrap();
    let first = spectrum_correspondence(&model, &minimiser).unwrap();

    let f = NleigProblem::new(15, 3, 1.0).unwrap();
    let x0 = stiefel(15, 3, 5);
    let model = ExPenModel::new(f, 10.0).unwrap();
    let config = SolverConfig { grad_tol: 1e-10, ..Default::default() };
    let solved = frcg_solve(&model, &x0, &config).unwrap();
    let x_star = newton_polish(model.objective(), solved.final_point, 1e-12);
    let second = spectrum_correspondence(&model, &x_star).unwrap();

    let secs = start.elapsed().as_secs_f64();
    let passed = first.check.passed && second.check.passed && secs < 30.0;
    report(
        5,
        "eigenvalue correspondence",
        passed,
        format!(
            "brockett {:.2e} over {} eigenvalues, nleig {:.2e} over {} eigenvalues (CG stationarity {:.1e}), {secs:.2}s",
            first.check.max_rel_error,
            first.tangent_eigenvalues.len(),
            second.check.max_rel_error,
            second.tangent_eigenvalues.len(),
            solved.stationarity
        ),
    );
    assert!(passed);
}

/// Minimum of `f` over matrices whose columns are distinct signed unit vectors.
fn signed_selection_minimum<F: SmoothObjective>(f: &F) -> f64 {
    let (n, p) = f.dims();
    let mut best = f64::INFINITY;
    let mut rows = vec![0usize; p];
    let mut x = DenseMatrix::zeros(n, p);
    let total = n.pow(p as u32);
    for code in 0..total {
        let mut c = code;
        for r in rows.iter_mut() {
            *r = c % n;
            c /= n;
        }
        let mut sorted = rows.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() < p {
            continue;
        }
        for signs in 0..(1u32 << p) {
            x.fill(0.0);
            for (j, &r) in rows.iter().enumerate() {
                x[(r, j)] = if signs >> j & 1 == 1 { -1.0 } else { 1.0 };
            }
            best = best.min(f.value(&x).unwrap());
        }
    }
    best
}

#[test]
fn criterion_6_known_optimum() {
    let start = Instant::now();
    let f = BrockettProblem::new(diag(&[1.0, 2.0, 3.0]), diag(&[2.0, 1.0])).unwrap();
    let oracle = signed_selection_minimum(&f);
    // 12 * sup ||grad f|| over ||X^T X - I|| <= 1/6, where ||X||_F^2 <= p + sqrt(p)/6
    let (p, norm_b, norm_c) = (2.0_f64, 3.0, 2.0);
    let beta = 12.0 * norm_b * norm_c * (p + p.sqrt() / 6.0).sqrt();
    let config = SolverConfig { grad_tol: 1e-6, ..Default::default() };
    let mut best = f64::INFINITY;
    for seed in 0..20 {
        let x0 = stiefel(3, 2, seed);
        let model = ExPenModel::new(f.clone(), beta).unwrap();
        best = best.min(frcg_solve(&model, &x0, &config).unwrap().fval);
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = (oracle - 2.0).abs() < 1e-15 && (best - oracle).abs() <= 1e-6 && secs < 5.0;
    report(
        6,
        "known optimum",
        passed,
        format!("best fval {best:.12}, oracle {oracle}, beta {beta:.1}, {secs:.2}s"),
    );
    assert!(passed);
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

fn desk_scale_runs() -> (tempfile::TempDir, Vec<RunRecord>) {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_expen-bench"))
        .args(["--problem", "nleig", "--n", "250", "--p", "50", "--alpha", "1", "--repeats", "3", "--trace"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "expen-bench exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("runs.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let runs = serde_json::from_value(value["runs"].clone()).unwrap();
    (dir, runs)
}

#[test]
fn criteria_7_and_8_desk_scale_protocol() {
    let (dir, runs) = desk_scale_runs();

    let (header, rows) = read_csv(&dir.path().join("table.csv"));
    let mut c7 = header == TABLE_HEADER && rows.len() == 1 && runs.len() == 3;
    let mut monotone = true;
    for (repeat, run) in runs.iter().enumerate() {
        c7 &= run.termination == Termination::GradTol
            && run.iterations <= 10_000
            && run.stationarity <= 1e-3
            && run.feasibility <= 1e-12;
        let (trace_header, trace) = read_csv(&dir.path().join(format!("trace_{repeat:03}.csv")));
        c7 &= trace_header == TRACE_HEADER && trace.len() == run.iterations + 1;
        let h: Vec<f64> = trace.iter().map(|row| row[1].parse().unwrap()).collect();
        monotone &= h.windows(2).all(|w| w[1] <= w[0]);
    }
    c7 &= monotone;
    let fvals: Vec<String> = runs.iter().map(|r| format!("{:.6e}", r.fval)).collect();
    report(
        7,
        "desk-scale protocol",
        c7,
        format!(
            "fval {}, stationarity {}, feasibility {}, iterations {}, monotone {monotone}",
            fvals.join("/"),
            runs.iter().map(|r| format!("{:.1e}", r.stationarity)).collect::<Vec<_>>().join("/"),
            runs.iter().map(|r| format!("{:.1e}", r.feasibility)).collect::<Vec<_>>().join("/"),
            runs.iter().map(|r| r.iterations.to_string()).collect::<Vec<_>>().join("/"),
        ),
    );

    let converged: Vec<&RunRecord> = runs.iter().filter(|r| r.termination == Termination::GradTol).collect();
    let c8 = !converged.is_empty()
        && converged.iter().all(|r| r.certificate.certificate_holds() && r.certificate.feasibility_bound_holds());
    report(
        8,
        "stationarity certification",
        c8,
        converged
            .iter()
            .map(|r| {
                let c = &r.certificate;
                format!(
                    "{:.2e} <= {:.2e}, {:.2e} <= {:.2e}",
                    c.projected_riem_grad_norm,
                    c.certified_bound,
                    c.feasibility,
                    4.0 / c.beta * c.grad_h_norm
                )
            })
            .collect::<Vec<_>>()
            .join("; "),
    );
    assert!(c7 && c8);
}

#[test]
fn criterion_9_postprocess_descent() {
    let (n, p) = (7, 3);
    let beta = 2.5;
    let model = ExPenModel::new(ConstantObjective::new(n, p, 0.0), beta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let mut worst = 0.0_f64;
    let mut sampled = 0;
    while sampled < 50 {
        let x = stiefel(n, p, 900 + sampled as u64) + gaussian(&mut rng, n, p) * 0.04;
        let feas = feasibility(&x);
        if feas > 1.0 / 6.0 {
            continue;
        }
        let (projected, _) = postprocess(&model, &x).unwrap();
        let expected = model.value(&x).unwrap() - beta / 4.0 * feas * feas;
        worst = worst.max((model.value(&projected).unwrap() - expected).abs());
        sampled += 1;
    }
    let passed = worst <= 1e-10;
    report(9, "postprocess descent", passed, format!("max abs error {worst:.2e} over {sampled} points"));
    assert!(passed);
}
