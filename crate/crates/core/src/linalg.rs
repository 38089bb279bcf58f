//! Dense row-major matrices and numerical rank via singular values.
//!
//! The matrices handled here are small (state dimension by `p·k`, both at
//! desk scale), so the singular values are computed with a one-sided Jacobi
//! iteration which is simple and accurate at these sizes.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Default relative tolerance for rank decisions.
pub const DEFAULT_RANK_REL_TOL: f64 = 1e-8;

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from row-major data. Fails if the data length is inconsistent
    /// or contains non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("matrix entry"));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build entry-wise from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row-major view of the entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "inner dimensions must agree: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }

    /// Horizontal concatenation of equally-tall blocks.
    pub fn hstack(blocks: &[Matrix]) -> Matrix {
        assert!(!blocks.is_empty());
        let rows = blocks[0].rows;
        assert!(blocks.iter().all(|b| b.rows == rows));
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for b in blocks {
            for i in 0..rows {
                for j in 0..b.cols {
                    out.set(i, offset + j, b.get(i, j));
                }
            }
            offset += b.cols;
        }
        out
    }

    /// Sub-matrix of columns `lo..hi`.
    pub fn columns(&self, lo: usize, hi: usize) -> Matrix {
        assert!(lo <= hi && hi <= self.cols);
        Matrix::from_fn(self.rows, hi - lo, |i, j| self.get(i, lo + j))
    }

    fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Singular values in nonincreasing order, by one-sided Jacobi iteration
    /// applied to the columns of the thinner orientation.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let work = if self.rows >= self.cols {
            self.clone()
        } else {
            self.transpose()
        };
        jacobi_singular_values(work)
    }
}

/// One-sided (Hestenes) Jacobi: rotate pairs of columns of a tall matrix
/// until they are mutually orthogonal; the singular values are then the
/// column norms.
fn jacobi_singular_values(mut a: Matrix) -> Result<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    const MAX_SWEEPS: usize = 60;
    const EPS: f64 = 1e-15;

    let col_dot = |a: &Matrix, p: usize, q: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..m {
            s += a.get(i, p) * a.get(i, q);
        }
        s
    };

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..n {
            for q in (p + 1)..n {
                let app = col_dot(&a, p, p);
                let aqq = col_dot(&a, q, q);
                let apq = col_dot(&a, p, q);
                if apq.abs() <= EPS * Float::sqrt(app * aqq) {
                    continue;
                }
                converged = false;
                // Rotation angle zeroing the off-diagonal Gram entry.
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + Float::sqrt(1.0 + tau * tau));
                let c = 1.0 / Float::sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let vp = a.get(i, p);
                    let vq = a.get(i, q);
                    a.set(i, p, c * vp - s * vq);
                    a.set(i, q, s * vp + c * vq);
                }
            }
        }
    }
    if !converged {
        return Err(CoreError::SvdNonConvergence(MAX_SWEEPS));
    }

    let mut sv: Vec<f64> = (0..n).map(|j| Float::sqrt(col_dot(&a, j, j))).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    Ok(sv)
}

/// Outcome of a numerical rank decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// Singular values, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Count of singular values above `tolerance * sigma_max`.
    pub numeric_rank: usize,
    /// Relative tolerance used for the decision.
    pub tolerance: f64,
    /// Whether the numeric rank equals the row count.
    pub full_rank: bool,
}

/// Numerical rank of `mat`: the number of singular values exceeding
/// `rel_tol * sigma_max`. A zero matrix has rank 0.
pub fn numeric_rank(mat: &Matrix, rel_tol: f64) -> Result<RankReport> {
    if !(rel_tol > 0.0) {
        return Err(CoreError::InvalidParameter(alloc::format!(
            "rel_tol must be positive, got {rel_tol}"
        )));
    }
    let sv = mat.singular_values()?;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let rank = if sigma_max == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > rel_tol * sigma_max).count()
    };
    Ok(RankReport {
        full_rank: rank == mat.rows(),
        singular_values: sv,
        numeric_rank: rank,
        tolerance: rel_tol,
    })
}
