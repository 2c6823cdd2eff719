//! Sparse symmetric-positive-definite solves shared by assembly and stepping.
//!
//! Thin wrapper around a simplicial LDLT factorization with reverse
//! Cuthill-McKee fill reduction. Factorizations are built once per matrix and
//! reused across many right-hand sides.

use sprs::{CsMat, TriMat};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("LDLT factorization failed: {0}")]
    Factorization(String),
}

// One long-lived instance per factorization; boxing the large variant
// would only add indirection on every solve.
#[allow(clippy::large_enum_variant)]
enum Backend {
    Ldl(sprs_ldl::LdlNumeric<f64, usize>),
    /// Direct reciprocal for n < 2; the sparse LDLT workspace cannot be
    /// built that small.
    Diag(Vec<f64>),
}

/// Cached LDLT factorization of a sparse SPD matrix.
pub struct SpdSolver {
    backend: Backend,
    n: usize,
}

impl SpdSolver {
    pub fn new(matrix: &CsMat<f64>) -> Result<Self, LinalgError> {
        let n = matrix.rows();
        if n != matrix.cols() {
            return Err(LinalgError::NotSquare {
                rows: n,
                cols: matrix.cols(),
            });
        }
        let backend = if n < 2 {
            let mut diag = vec![0.0; n];
            for (value, (row, col)) in matrix.iter() {
                debug_assert_eq!(row, col);
                diag[row] += value;
            }
            if let Some(&d) = diag.iter().find(|&&d| d <= 0.0) {
                return Err(LinalgError::Factorization(format!(
                    "nonpositive diagonal {d} in a trivial system"
                )));
            }
            Backend::Diag(diag)
        } else {
            let ldl = sprs_ldl::Ldl::new()
                .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
                .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
                .numeric(matrix.view())
                .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
            Backend::Ldl(ldl)
        };
        Ok(Self { backend, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "rhs length mismatch");
        match &self.backend {
            Backend::Ldl(ldl) => ldl.solve(rhs),
            Backend::Diag(diag) => rhs.iter().zip(diag).map(|(r, d)| r / d).collect(),
        }
    }
}

/// y = M x for a sparse matrix in either compressed storage order.
pub fn spmv(m: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.cols(), x.len(), "dimension mismatch in spmv");
    let mut y = vec![0.0; m.rows()];
    for (value, (row, col)) in m.iter() {
        y[row] += value * x[col];
    }
    y
}

/// Largest absolute asymmetry |M - M^T| over all stored entries.
pub fn max_asymmetry(m: &CsMat<f64>) -> f64 {
    let mt = m.transpose_view().to_owned();
    let diff = &m.view() - &mt.view();
    diff.iter().fold(0.0f64, |acc, (v, _)| acc.max(v.abs()))
}

/// `diag(d) + scale * a`, the left-hand matrix of one implicit solve.
pub fn diag_plus_scaled(d: &[f64], a: &CsMat<f64>, scale: f64) -> CsMat<f64> {
    assert_eq!(a.rows(), d.len());
    assert_eq!(a.cols(), d.len());
    let n = d.len();
    let mut t = TriMat::with_capacity((n, n), a.nnz() + n);
    for (value, (row, col)) in a.iter() {
        t.add_triplet(row, col, value * scale);
    }
    for (i, &di) in d.iter().enumerate() {
        t.add_triplet(i, i, di);
    }
    t.to_csc()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsMat<f64> {
        let mut t = TriMat::new((n, n));
        for i in 0..n {
            t.add_triplet(i, i, 2.0);
            if i > 0 {
                t.add_triplet(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.add_triplet(i, i + 1, -1.0);
            }
        }
        t.to_csc()
    }

    #[test]
    fn solve_roundtrip() {
        let a = laplacian_1d(50);
        let solver = SpdSolver::new(&a).unwrap();
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = spmv(&a, &x_true);
        let x = solver.solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-10);
        }
    }

    #[test]
    fn diag_plus_scaled_matches_dense() {
        let a = laplacian_1d(4);
        let d = vec![1.0, 2.0, 3.0, 4.0];
        let m = diag_plus_scaled(&d, &a, 0.5);
        let x = vec![1.0, -1.0, 2.0, 0.5];
        let y = spmv(&m, &x);
        let ax = spmv(&a, &x);
        for i in 0..4 {
            assert!((y[i] - (d[i] * x[i] + 0.5 * ax[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn asymmetry_detects_perturbation() {
        let mut t = TriMat::new((2, 2));
        t.add_triplet(0, 1, 1.0);
        t.add_triplet(1, 0, 1.5);
        let m: CsMat<f64> = t.to_csc();
        assert!((max_asymmetry(&m) - 0.5).abs() < 1e-15);
    }
}
