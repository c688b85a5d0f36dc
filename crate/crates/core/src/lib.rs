//! Exact smooth penalty for optimization over the Stiefel manifold
//! `{X in R^{n x p} : X^T X = I_p}`.
//!
//! The constrained problem `min f(X)` is replaced by the unconstrained
//! minimisation of
//!
//! ```text
//! h(X) = f(X A(X)) + (beta / 4) ||X^T X - I_p||_F^2,   A(X) = (3/2) I_p - (1/2) X^T X,
//! ```
//!
//! whose gradient costs one gradient of `f` plus a few `n x p x p` products.
//! The crate provides the penalty oracles ([`model`]), manifold utilities and
//! the post-projection stationarity certificate ([`geometry`]), two benchmark
//! families ([`problems`]), a Fletcher-Reeves CG solver with a strong Wolfe
//! line search ([`solvers`]), finite-difference and spectral checks
//! ([`verify`]), and the benchmark protocol behind the `expen-bench` binary
//! ([`bench`]).
//!
//! ```
//! use expen::prelude::*;
//!
//! let f = NleigProblem::new(20, 3, 1.0).unwrap();
//! let x0 = random_stiefel(RandomSpec::new(20, 3, 7).unwrap()).unwrap();
//! let model = ExPenModel::with_default_beta(f, &x0).unwrap();
//! let report = frcg_solve(&model, &x0, &SolverConfig::default()).unwrap();
//! assert!(report.feasibility < 1e-12);
//! ```

pub mod bench;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod problems;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{
        feasibility, postprocess, project_stiefel, riemannian_grad, riemannian_hess_quadform, stationarity_report,
        tangent_project, StationarityReport,
    };
    pub use crate::linalg::{econ_svd, sym, tridiag_solve, DenseMatrix, EconSvd, TridiagMatrix};
    pub use crate::model::{apen_map, jx_apply, ExPenModel, SmoothObjective};
    pub use crate::problems::{
        random_stiefel, BrockettProblem, ConstantObjective, HalfSquaredNorm, LinearObjective, NleigProblem, RandomSpec,
    };
    pub use crate::solvers::{frcg_solve, gd_solve, IterTrace, SolverConfig, SolverReport, Termination};
}
