use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: expected a {expected:?} matrix, found {found:?}")]
    Dimension {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },

    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },

    #[error("tridiagonal solve: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error(
        "economic SVD of a {rows}x{cols} matrix did not converge \
         (frobenius norm {frobenius:.3e}, max |entry| {max_abs:.3e})"
    )]
    SvdNoConvergence {
        rows: usize,
        cols: usize,
        frobenius: f64,
        max_abs: f64,
    },

    #[error(
        "projection onto the Stiefel manifold is not unique: \
         sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}"
    )]
    DegenerateProjection { sigma_min: f64, sigma_max: f64 },

    #[error("{op}: point is not on the Stiefel manifold (||X^T X - I||_F = {feasibility:.3e})")]
    NotFeasible { op: &'static str, feasibility: f64 },

    #[error("direction is not tangent (||sym(D^T X)||_F = {residual:.3e})")]
    NotTangent { residual: f64 },

    #[error("{what} is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { what: &'static str, asymmetry: f64 },

    #[error("objective does not provide a Hessian-vector product")]
    MissingHessian,

    #[error("line search: not a descent direction (slope {slope:.3e})")]
    NonDescent { slope: f64 },

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("point is not first-order stationary (||grad f||_F = {grad_norm:.3e})")]
    NotStationary { grad_norm: f64 },

    #[error("{what} of size {size} exceeds the limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            reason: reason.into(),
        }
    }
}
