//! With-replacement row subsampling and the weighted subsample estimator.
//!
//! A draw of size r records multiplicities per row. The estimator solves the
//! reweighted least-squares problem in which each sampled row is scaled by
//! `1/sqrt(r pi_i)`; a row drawn `K_i` times is folded into a single scaled
//! row with weight `sqrt(K_i/(r pi_i))`, which leaves the normal equations
//! unchanged while keeping the solve proportional to the number of distinct
//! rows. `weighted_ls_matrix_form` solves the same problem through the
//! diagonal reweighting identity `(XᵀWX)⁻¹XᵀWY` with `W_i = K_i/(r pi_i)`
//! and exists as an independent cross-check of the primary path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{DesignMatrix, ResponseVector, RANK_REL_TOL};
use crate::probs::{ProbabilityVector, SchemeSpec};
use crate::rng::{rng_from_seed, CategoricalSampler};

/// Multiplicities of one with-replacement subsample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleDraw {
    counts: Vec<u32>,
    r: usize,
    seed: u64,
}

impl SubsampleDraw {
    /// Build a draw from explicit multiplicities; they must sum to `r`.
    pub fn from_counts(counts: Vec<u32>, r: usize, seed: u64) -> Result<Self> {
        if r < 1 {
            return Err(Error::InvalidSize);
        }
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total != r as u64 {
            return Err(Error::InvalidArgument(format!(
                "counts sum to {total}, expected r = {r}"
            )));
        }
        Ok(SubsampleDraw { counts, r, seed })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of distinct rows present in the draw.
    pub fn distinct_rows(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// The weighted subsample least-squares solution.
#[derive(Debug, Clone)]
pub struct SubsampleEstimate {
    pub beta_tilde: DVector<f64>,
    pub draw: SubsampleDraw,
    pub scheme: SchemeSpec,
}

/// Draw a multinomial subsample of size `r` from the given probabilities.
///
/// The draw is r independent categorical samples from a ChaCha8 generator
/// keyed by `seed`, so identical `(pi, r, seed)` triples reproduce the same
/// counts on every platform. The categorical step uses an alias table when
/// `r >= n` and inverse-CDF binary search otherwise; both are exact.
pub fn draw_subsample(pi: &ProbabilityVector, r: usize, seed: u64) -> Result<SubsampleDraw> {
    if r < 1 {
        return Err(Error::InvalidSize);
    }
    let n = pi.len();
    let sampler = CategoricalSampler::new(pi.pi().as_slice(), r);
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u32; n];
    for _ in 0..r {
        counts[sampler.sample(&mut rng)] += 1;
    }
    Ok(SubsampleDraw { counts, r, seed })
}

fn check_draw_inputs(
    x: &DesignMatrix,
    y: &ResponseVector,
    draw: &SubsampleDraw,
    pi: &ProbabilityVector,
) -> Result<()> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if draw.counts.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: draw.counts.len(),
        });
    }
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.len(),
        });
    }
    for (i, &c) in draw.counts.iter().enumerate() {
        if c > 0 && pi.pi()[i] <= 0.0 {
            return Err(Error::ZeroProbability { index: i });
        }
    }
    Ok(())
}

/// Solve the weighted subsample least-squares problem by QR on the scaled
/// distinct rows.
pub fn weighted_ls(
    x: &DesignMatrix,
    y: &ResponseVector,
    draw: &SubsampleDraw,
    pi: &ProbabilityVector,
) -> Result<SubsampleEstimate> {
    check_draw_inputs(x, y, draw, pi)?;
    let p = x.n_cols();
    let drawn: Vec<usize> = (0..x.n_rows()).filter(|&i| draw.counts[i] > 0).collect();
    if drawn.len() < p {
        return Err(Error::SingularSubsample);
    }

    let r = draw.r as f64;
    let mut a = DMatrix::zeros(drawn.len(), p);
    let mut b = DVector::zeros(drawn.len());
    for (row, &i) in drawn.iter().enumerate() {
        let w = (draw.counts[i] as f64 / (r * pi.pi()[i])).sqrt();
        for j in 0..p {
            a[(row, j)] = w * x.values()[(i, j)];
        }
        b[row] = w * y.values()[i];
    }

    let qr = a.qr();
    let q = qr.q();
    let rr = qr.r();
    let max_diag = (0..p).map(|i| rr[(i, i)].abs()).fold(0.0_f64, f64::max);
    if max_diag == 0.0 {
        return Err(Error::SingularSubsample);
    }
    for i in 0..p {
        if rr[(i, i)].abs() <= RANK_REL_TOL * max_diag {
            return Err(Error::SingularSubsample);
        }
    }
    let beta_tilde = rr
        .solve_upper_triangular(&(q.transpose() * b))
        .ok_or(Error::SingularSubsample)?;
    if beta_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSubsample);
    }

    Ok(SubsampleEstimate {
        beta_tilde,
        draw: draw.clone(),
        scheme: pi.scheme(),
    })
}

/// Solve the same problem as [`weighted_ls`] through the normal equations
/// with the diagonal reweighting matrix, via full-pivot LU. Kept as an
/// independent oracle path for equivalence testing.
pub fn weighted_ls_matrix_form(
    x: &DesignMatrix,
    y: &ResponseVector,
    draw: &SubsampleDraw,
    pi: &ProbabilityVector,
) -> Result<SubsampleEstimate> {
    check_draw_inputs(x, y, draw, pi)?;
    let p = x.n_cols();
    let r = draw.r as f64;

    let mut m = DMatrix::zeros(p, p);
    let mut v = DVector::zeros(p);
    for i in 0..x.n_rows() {
        if draw.counts[i] == 0 {
            continue;
        }
        let w = draw.counts[i] as f64 / (r * pi.pi()[i]);
        let xi = x.row(i);
        m += w * &xi * xi.transpose();
        v += w * y.values()[i] * &xi;
    }

    let lu = m.full_piv_lu();
    let u = lu.u();
    let max_diag = (0..p).map(|i| u[(i, i)].abs()).fold(0.0_f64, f64::max);
    if max_diag == 0.0 {
        return Err(Error::SingularSubsample);
    }
    for i in 0..p {
        if u[(i, i)].abs() <= RANK_REL_TOL * max_diag {
            return Err(Error::SingularSubsample);
        }
    }
    let beta_tilde = lu.solve(&v).ok_or(Error::SingularSubsample)?;
    if beta_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSubsample);
    }

    Ok(SubsampleEstimate {
        beta_tilde,
        draw: draw.clone(),
        scheme: pi.scheme(),
    })
}
