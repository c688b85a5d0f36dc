//! Dense linear-algebra substrate.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (column-major storage). Everything in
//! this module is a pure function of its inputs.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Real dense matrix carrying iterates, gradients and search directions.
pub type DenseMatrix = DMatrix<f64>;

/// Builds an `rows x cols` matrix from row-major entries.
pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("from_row_major", "dimensions must be positive"));
    }
    if entries.len() != rows * cols {
        return Err(Error::invalid(
            "from_row_major",
            format!("expected {} entries, got {}", rows * cols, entries.len()),
        ));
    }
    let m = DenseMatrix::from_row_slice(rows, cols, entries);
    ensure_finite("from_row_major", &m)?;
    Ok(m)
}

/// Copies `m` out in row-major order.
pub fn to_row_major(m: &DenseMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter().copied());
    }
    out
}

pub fn ensure_finite(op: &'static str, m: &DenseMatrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

pub fn check_dims(op: &'static str, m: &DenseMatrix, expected: (usize, usize)) -> Result<()> {
    if m.shape() == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            op,
            expected,
            found: m.shape(),
        })
    }
}

/// Frobenius inner product `tr(A^T B)`.
#[inline]
pub fn inner(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.dot(b)
}

#[inline]
pub fn frob(a: &DenseMatrix) -> f64 {
    a.norm()
}

/// Symmetric part `(M + M^T) / 2` of a square matrix.
pub fn sym(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension {
            op: "sym",
            expected: (m.nrows(), m.nrows()),
            found: m.shape(),
        });
    }
    Ok(sym_unchecked(m))
}

pub(crate) fn sym_unchecked(m: &DenseMatrix) -> DenseMatrix {
    let mut s = m + m.transpose();
    s *= 0.5;
    s
}

/// `X^T X - I_p`.
pub(crate) fn gram_defect(x: &DenseMatrix) -> DenseMatrix {
    let mut g = x.tr_mul(x);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g
}

/// Thin SVD `X = U diag(s) V^T` of a tall matrix.
#[derive(Debug, Clone)]
pub struct EconSvd {
    /// `n x p`, orthonormal columns.
    pub u: DenseMatrix,
    /// Nonincreasing.
    pub singular_values: DVector<f64>,
    /// `p x p` orthogonal.
    pub v: DenseMatrix,
}

impl EconSvd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values[0]
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values[self.singular_values.len() - 1]
    }
}

const SVD_MAX_SWEEPS: usize = 10_000;

pub fn econ_svd(x: &DenseMatrix) -> Result<EconSvd> {
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::invalid(
            "econ_svd",
            format!("expected rows >= cols, got {n}x{p}"),
        ));
    }
    ensure_finite("econ_svd", x)?;
    let no_convergence = || Error::SvdNoConvergence {
        rows: n,
        cols: p,
        frobenius: x.norm(),
        max_abs: x.amax(),
    };
    let svd = SVD::try_new(x.clone(), true, true, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(no_convergence)?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(no_convergence()),
    };

    let mut order: Vec<usize> = (0..p).collect();
    // stable: ties keep factorization order
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut su = DenseMatrix::zeros(n, p);
    let mut sv = DenseMatrix::zeros(p, p);
    let mut s = DVector::zeros(p);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sv.set_column(dst, &v_t.row(src).transpose());
        s[dst] = svd.singular_values[src];
    }
    Ok(EconSvd {
        u: su,
        singular_values: s,
        v: sv,
    })
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagMatrix {
    diag: Vec<f64>,
    sub: Vec<f64>,
}

impl TridiagMatrix {
    pub fn new(diag: Vec<f64>, sub: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("TridiagMatrix::new", "dimension must be positive"));
        }
        if sub.len() + 1 != diag.len() {
            return Err(Error::invalid(
                "TridiagMatrix::new",
                format!("sub-diagonal must have {} entries, got {}", diag.len() - 1, sub.len()),
            ));
        }
        if !diag.iter().chain(sub.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "TridiagMatrix::new" });
        }
        Ok(Self { diag, sub })
    }

    /// The 1-D Dirichlet Laplacian stencil: 2 on the diagonal, -1 off it.
    pub fn laplacian(n: usize) -> Result<Self> {
        Self::new(vec![2.0; n], vec![-1.0; n.saturating_sub(1)])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &s) in self.sub.iter().enumerate() {
            m[(i + 1, i)] = s;
            m[(i, i + 1)] = s;
        }
        m
    }

    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.sub[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.sub[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// `T * M`, column by column.
    pub fn apply(&self, m: &DenseMatrix) -> DenseMatrix {
        let n = self.dim();
        debug_assert_eq!(m.nrows(), n);
        let mut out = DenseMatrix::zeros(n, m.ncols());
        for j in 0..m.ncols() {
            let col = m.column(j);
            let mut dst = out.column_mut(j);
            for i in 0..n {
                let mut acc = self.diag[i] * col[i];
                if i > 0 {
                    acc += self.sub[i - 1] * col[i - 1];
                }
                if i + 1 < n {
                    acc += self.sub[i] * col[i + 1];
                }
                dst[i] = acc;
            }
        }
        out
    }

    /// Thomas algorithm, O(n). No pivoting; intended for the positive definite
    /// (hence diagonally safe) matrices used here.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::invalid(
                "tridiag_solve",
                format!("rhs has length {}, expected {n}", rhs.len()),
            ));
        }
        let scale = self
            .diag
            .iter()
            .chain(self.sub.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot.abs() <= tiny {
            return Err(Error::SingularMatrix { row: 0 });
        }
        if n > 1 {
            c[0] = self.sub[0] / pivot;
        }
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.sub[i - 1] * c[i - 1];
            if pivot.abs() <= tiny || !pivot.is_finite() {
                return Err(Error::SingularMatrix { row: i });
            }
            if i + 1 < n {
                c[i] = self.sub[i] / pivot;
            }
            d[i] = (rhs[i] - self.sub[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

pub fn tridiag_solve(l: &TridiagMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    l.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        from_row_major(rows, cols, v).unwrap()
    }

    #[test]
    fn sym_examples() {
        let s = mat(2, 2, &[1.0, 3.0, 3.0, 5.0]);
        assert_eq!(sym(&s).unwrap(), s);

        let k = mat(2, 2, &[0.0, 4.0, -4.0, 0.0]);
        assert_eq!(sym(&k).unwrap(), DenseMatrix::zeros(2, 2));

        let m = mat(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert_eq!(sym(&m).unwrap(), mat(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn sym_rejects_non_square() {
        let m = DenseMatrix::zeros(3, 2);
        assert!(matches!(sym(&m), Err(Error::Dimension { .. })));
    }

    #[test]
    fn svd_examples() {
        let q = mat(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let svd = econ_svd(&q).unwrap();
        for s in svd.singular_values.iter() {
            assert!((s - 1.0).abs() < 1e-14);
        }

        let z = DenseMatrix::zeros(4, 2);
        let svd = econ_svd(&z).unwrap();
        assert!(svd.singular_values.iter().all(|s| *s == 0.0));

        let d = mat(3, 2, &[3.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let svd = econ_svd(&d).unwrap();
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((svd.singular_values[1] - 2.0).abs() < 1e-14);

        // order is enforced even when the input is "upside down"
        let d = mat(3, 2, &[2.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        let svd = econ_svd(&d).unwrap();
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((svd.reconstruct() - &d).norm() < 1e-14);
    }

    #[test]
    fn svd_rejects_wide() {
        assert!(econ_svd(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = DenseMatrix::zeros(3, 2);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(econ_svd(&m), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn tridiag_examples() {
        let l = TridiagMatrix::laplacian(2).unwrap();
        let z = l.solve(&[1.0, 0.0]).unwrap();
        assert!((z[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((z[1] - 1.0 / 3.0).abs() < 1e-15);

        let l1 = TridiagMatrix::laplacian(1).unwrap();
        assert_eq!(l1.solve(&[4.0]).unwrap(), vec![2.0]);

        let l5 = TridiagMatrix::laplacian(5).unwrap();
        assert_eq!(l5.solve(&[0.0; 5]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn tridiag_zero_pivot() {
        let l = TridiagMatrix::new(vec![1.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(l.solve(&[1.0, 1.0]), Err(Error::SingularMatrix { row: 1 })));
        let l = TridiagMatrix::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(l.solve(&[1.0, 1.0]), Err(Error::SingularMatrix { row: 0 })));
    }

    #[test]
    fn tridiag_bad_lengths() {
        assert!(TridiagMatrix::new(vec![1.0, 1.0], vec![]).is_err());
        let l = TridiagMatrix::laplacian(3).unwrap();
        assert!(l.solve(&[1.0]).is_err());
    }

    #[test]
    fn tridiag_apply_matches_dense() {
        let l = TridiagMatrix::laplacian(6).unwrap();
        let m = DenseMatrix::from_fn(6, 2, |i, j| (i as f64) - 0.5 * j as f64);
        assert!((l.apply(&m) - l.to_dense() * &m).norm() < 1e-14);
        let v: Vec<f64> = (0..6).map(|i| (i * i) as f64).collect();
        let dense = l.to_dense() * DVector::from_column_slice(&v);
        assert_eq!(l.apply_vec(&v), dense.as_slice());
    }

    #[test]
    fn row_major_roundtrip() {
        let m = mat(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(to_row_major(&m), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    fn arb_square() -> impl Strategy<Value = DenseMatrix> {
        (1usize..6).prop_flat_map(|n| {
            prop::collection::vec(-10.0f64..10.0, n * n)
                .prop_map(move |v| DenseMatrix::from_vec(n, n, v))
        })
    }

    fn arb_tall() -> impl Strategy<Value = DenseMatrix> {
        (1usize..8, 1usize..8).prop_flat_map(|(a, b)| {
            let (n, p) = (a.max(b), a.min(b));
            prop::collection::vec(-5.0f64..5.0, n * p)
                .prop_map(move |v| DenseMatrix::from_vec(n, p, v))
        })
    }

    proptest! {
        #[test]
        fn sym_idempotent(m in arb_square()) {
            let s = sym(&m).unwrap();
            let ss = sym(&s).unwrap();
            prop_assert!((ss - &s).norm() <= 1e-15 * (1.0 + s.norm()));
        }

        #[test]
        fn sym_is_orthogonal_projector(m in arb_square(), seed in any::<u64>()) {
            let n = m.nrows();
            let mut state = seed;
            let raw = DenseMatrix::from_fn(n, n, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            });
            let s = sym(&raw).unwrap();
            let lhs = inner(&sym(&m).unwrap(), &s);
            let rhs = inner(&m, &s);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * m.norm() * s.norm() + 1e-300);
        }

        #[test]
        fn svd_reconstructs(x in arb_tall()) {
            let svd = econ_svd(&x).unwrap();
            let p = x.ncols();
            let tol = 1e-10 * (1.0 + x.norm());
            prop_assert!((svd.reconstruct() - &x).norm() <= tol);
            let eye = DenseMatrix::identity(p, p);
            prop_assert!((svd.v.tr_mul(&svd.v) - &eye).norm() <= 1e-12 * p as f64);
            for w in svd.singular_values.as_slice().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            if svd.sigma_min() > 1e-8 * svd.sigma_max() {
                prop_assert!((svd.u.tr_mul(&svd.u) - &eye).norm() <= 1e-12 * p as f64);
            }
        }
    }
}
