//! Dense least-squares kernel: full-sample OLS, leverage scores, and the row
//! statistics the sampling probability schemes are built from.
//!
//! Everything here is a pure function of its inputs. Solves go through a thin
//! Householder QR factorization; the Gram inverse `(XᵀX)⁻¹` is materialized
//! only because several probability schemes need its rows (p is small in every
//! intended setting, so the O(p²) storage is irrelevant).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the QR factor diagonal below which a design is
/// declared rank deficient.
pub const RANK_REL_TOL: f64 = 1e-10;

/// An n x p predictor matrix with n >= p >= 1 and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if p < 1 || n < p {
            return Err(Error::InvalidShape { n, p });
        }
        for col in 0..p {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Self { values })
    }

    /// Convenience constructor from row-major data.
    pub fn from_rows(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// The i-th predictor row as an owned vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }
}

/// A finite response vector; its length must match the design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector {
    values: DVector<f64>,
}

impl ResponseVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        for (row, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col: 0 });
            }
        }
        Ok(Self { values })
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(data))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }
}

/// Full-sample OLS solution bundle.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Least-squares coefficients.
    pub beta_hat: DVector<f64>,
    /// Per-row residuals `e = Y - X beta_hat`.
    pub residuals: DVector<f64>,
    /// Leverage scores `h_i = x_iᵀ(XᵀX)⁻¹x_i`; they sum to p.
    pub leverage: DVector<f64>,
    /// Noise variance estimate `‖e‖²/(n-p)` (zero for an interpolating fit).
    pub sigma2_hat: f64,
    /// Explicit `(XᵀX)⁻¹`, kept for the probability schemes that need it.
    pub gram_inverse: DMatrix<f64>,
}

struct ThinQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

/// Householder QR with a rank check on the R diagonal.
fn thin_qr(x: &DMatrix<f64>) -> Result<ThinQr> {
    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let p = r.ncols();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    let tol = RANK_REL_TOL * max_diag;
    for i in 0..p {
        let diag = r[(i, i)].abs();
        if diag <= tol || max_diag == 0.0 {
            return Err(Error::RankDeficient {
                index: i,
                diag,
                tol,
            });
        }
    }
    Ok(ThinQr { q, r })
}

/// `(XᵀX)⁻¹` computed as R⁻¹R⁻ᵀ from the QR factor, never by inverting the
/// Gram matrix directly.
fn gram_inverse_from_r(r: &DMatrix<f64>) -> DMatrix<f64> {
    let p = r.ncols();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("upper triangular factor passed the rank check");
    &r_inv * r_inv.transpose()
}

/// Inverse of the Gram matrix `XᵀX` via the thin QR factor.
pub fn gram_inverse(x: &DesignMatrix) -> Result<DMatrix<f64>> {
    let qr = thin_qr(x.values())?;
    Ok(gram_inverse_from_r(&qr.r))
}

/// Fit ordinary least squares on the full sample.
///
/// Returns the coefficient vector, residuals, leverage scores, the noise
/// variance estimate, and `(XᵀX)⁻¹`.
pub fn ols_fit(x: &DesignMatrix, y: &ResponseVector) -> Result<OlsFit> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }

    let qr = thin_qr(x.values())?;
    let qty = qr.q.transpose() * y.values();
    let beta_hat =
        qr.r.solve_upper_triangular(&qty)
            .expect("upper triangular factor passed the rank check");
    let residuals = y.values() - x.values() * &beta_hat;
    let leverage = DVector::from_fn(n, |i, _| qr.q.row(i).norm_squared());
    let sigma2_hat = if n > p {
        residuals.norm_squared() / (n - p) as f64
    } else {
        0.0
    };
    let gram_inverse = gram_inverse_from_r(&qr.r);

    Ok(OlsFit {
        beta_hat,
        residuals,
        leverage,
        sigma2_hat,
        gram_inverse,
    })
}

/// Leverage scores as squared row norms of the thin orthogonal factor.
pub fn leverage_scores(x: &DesignMatrix) -> Result<DVector<f64>> {
    let qr = thin_qr(x.values())?;
    Ok(DVector::from_fn(x.n_rows(), |i, _| {
        qr.q.row(i).norm_squared()
    }))
}

/// `‖(XᵀX)⁻¹ x_i‖` for every row.
pub fn gram_inverse_row_norms(x: &DesignMatrix) -> Result<DVector<f64>> {
    let g = gram_inverse(x)?;
    let scaled = x.values() * &g;
    Ok(DVector::from_fn(x.n_rows(), |i, _| scaled.row(i).norm()))
}

/// Euclidean norm of every predictor row.
pub fn row_norms(x: &DesignMatrix) -> DVector<f64> {
    DVector::from_fn(x.n_rows(), |i, _| x.values().row(i).norm())
}
