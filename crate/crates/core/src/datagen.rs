//! Synthetic predictor matrices and responses for the experiment harness.
//!
//! Rows are drawn iid from one of four families, all built on the banded
//! scale matrix `D[i][j] = rho^|i-j|`:
//!
//! * `mn` — multivariate normal with unit mean,
//! * `t3` / `t1` — multivariate t with 3 or 1 degrees of freedom, location
//!   shifted to unit mean (t1 has no finite moments),
//! * `ln` — entrywise exponential of the unit-mean normal.
//!
//! The t families default to the location-shift construction
//! `1 + L z / sqrt(s/nu)` with one chi-square draw per row. Setting
//! `t_noncentral` moves the shift inside the scaling,
//! `(1 + L z) / sqrt(s/nu)`, which matches the classical noncentral-t
//! construction instead.
//!
//! Normal variates come from the ziggurat sampler in `rand_distr`; each
//! generator is ChaCha8 keyed by the spec seed, so identical specs reproduce
//! identical data on every platform. Per row the draw order is fixed: p
//! standard normals, then the chi-square for the t families.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DesignMatrix, ResponseVector};
use crate::rng::rng_from_seed;

pub const DEFAULT_RHO: f64 = 0.7;
pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Mn,
    T3,
    Ln,
    T1,
}

impl DistKind {
    pub fn name(self) -> &'static str {
        match self {
            DistKind::Mn => "mn",
            DistKind::T3 => "t3",
            DistKind::Ln => "ln",
            DistKind::T1 => "t1",
        }
    }
}

impl std::fmt::Display for DistKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DistKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mn" => Ok(DistKind::Mn),
            "t3" => Ok(DistKind::T3),
            "ln" => Ok(DistKind::Ln),
            "t1" => Ok(DistKind::T1),
            other => Err(Error::InvalidArgument(format!(
                "unknown distribution {other:?}"
            ))),
        }
    }
}

/// Everything needed to generate one synthetic design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub dist: DistKind,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub t_noncentral: bool,
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

impl DataSpec {
    pub fn new(dist: DistKind, n: usize, p: usize, seed: u64) -> Self {
        DataSpec {
            dist,
            n,
            p,
            seed,
            rho: DEFAULT_RHO,
            sigma: DEFAULT_SIGMA,
            t_noncentral: false,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 || self.n <= self.p {
            return Err(Error::InvalidSpec(format!(
                "need n > p >= 1, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

fn scale_matrix_cholesky(p: usize, rho: f64) -> DMatrix<f64> {
    let d = DMatrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()));
    Cholesky::new(d)
        .expect("banded correlation matrix is positive definite for |rho| < 1")
        .l()
}

/// Generate the design matrix described by the spec.
pub fn gen_design(spec: &DataSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let chol = scale_matrix_cholesky(spec.p, spec.rho);
    let mut rng = rng_from_seed(spec.seed);
    let mut values = DMatrix::zeros(spec.n, spec.p);
    let mut z = DVector::zeros(spec.p);

    let nu = match spec.dist {
        DistKind::T3 => Some(3.0),
        DistKind::T1 => Some(1.0),
        _ => None,
    };
    let chi = nu.map(|v| ChiSquared::new(v).expect("valid degrees of freedom"));

    for i in 0..spec.n {
        for j in 0..spec.p {
            z[j] = StandardNormal.sample(&mut rng);
        }
        let correlated = &chol * &z;
        match spec.dist {
            DistKind::Mn => {
                for j in 0..spec.p {
                    values[(i, j)] = 1.0 + correlated[j];
                }
            }
            DistKind::Ln => {
                for j in 0..spec.p {
                    values[(i, j)] = (1.0 + correlated[j]).exp();
                }
            }
            DistKind::T3 | DistKind::T1 => {
                let nu = nu.unwrap();
                let s: f64 = chi.as_ref().unwrap().sample(&mut rng);
                let scale = (s / nu).max(f64::MIN_POSITIVE).sqrt();
                for j in 0..spec.p {
                    values[(i, j)] = if spec.t_noncentral {
                        (1.0 + correlated[j]) / scale
                    } else {
                        1.0 + correlated[j] / scale
                    };
                }
            }
        }
    }

    DesignMatrix::new(values)
}

/// The coefficient template used throughout the synthetic experiments: the
/// first and last two entries are 1, everything in between is 0.1.
pub fn default_beta0(p: usize) -> Result<DVector<f64>> {
    if p < 4 {
        return Err(Error::TooSmall(p));
    }
    Ok(DVector::from_fn(p, |j, _| {
        if j < 2 || j >= p - 2 {
            1.0
        } else {
            0.1
        }
    }))
}

/// Generate `Y = X beta0 + eps` with iid normal noise of standard deviation
/// `sigma` (zero is allowed for a noiseless response).
pub fn gen_response(
    x: &DesignMatrix,
    beta0: &DVector<f64>,
    sigma: f64,
    seed: u64,
) -> Result<ResponseVector> {
    if beta0.len() != x.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: x.n_cols(),
            got: beta0.len(),
        });
    }
    if sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut y = x.values() * beta0;
    if sigma > 0.0 {
        for v in y.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    ResponseVector::new(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn beta_template_examples() {
        let b = default_beta0(10).unwrap();
        let expected = [1.0, 1.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 1.0, 1.0];
        for (j, &e) in expected.iter().enumerate() {
            assert_eq!(b[j], e);
        }
        assert_eq!(default_beta0(4).unwrap().as_slice(), &[1.0; 4]);
        assert_eq!(
            default_beta0(5).unwrap().as_slice(),
            &[1.0, 1.0, 0.1, 1.0, 1.0]
        );
        assert!(matches!(default_beta0(3), Err(Error::TooSmall(3))));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = DataSpec::new(DistKind::T3, 50, 4, 99);
        let a = gen_design(&spec).unwrap();
        let b = gen_design(&spec).unwrap();
        assert_eq!(a.values(), b.values());
        let c = gen_design(&spec.with_seed(100)).unwrap();
        assert_ne!(a.values(), c.values());

        let beta = default_beta0(4).unwrap();
        let y1 = gen_response(&a, &beta, 1.0, 7).unwrap();
        let y2 = gen_response(&a, &beta, 1.0, 7).unwrap();
        assert_eq!(y1.values(), y2.values());
    }

    #[test]
    fn mn_column_means_are_near_one() {
        let spec = DataSpec::new(DistKind::Mn, 5_000, 10, 42);
        let x = gen_design(&spec).unwrap();
        for j in 0..10 {
            let mean: f64 = x.values().column(j).sum() / 5_000.0;
            // D_jj = 1, so the column mean has sd 1/sqrt(n).
            assert!(
                (mean - 1.0).abs() < 3.0 / 5_000f64.sqrt(),
                "column {j} mean {mean}"
            );
        }
    }

    #[test]
    fn mn_sample_covariance_converges_to_scale_matrix() {
        let n = 100_000usize;
        let p = 3usize;
        let spec = DataSpec::new(DistKind::Mn, n, p, 2);
        let x = gen_design(&spec).unwrap();
        let means: Vec<f64> = (0..p)
            .map(|j| x.values().column(j).sum() / n as f64)
            .collect();
        for i in 0..p {
            for j in 0..p {
                let mut cov = 0.0;
                for row in 0..n {
                    cov += (x.values()[(row, i)] - means[i]) * (x.values()[(row, j)] - means[j]);
                }
                cov /= (n - 1) as f64;
                let expected = DEFAULT_RHO.powi((i as i32 - j as i32).abs());
                assert!(
                    (cov - expected).abs() <= 0.02,
                    "cov[{i}][{j}] = {cov} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn zero_rho_gives_uncorrelated_columns() {
        let n = 50_000usize;
        let spec = DataSpec::new(DistKind::Mn, n, 2, 5).with_rho(0.0);
        let x = gen_design(&spec).unwrap();
        let m0: f64 = x.values().column(0).sum() / n as f64;
        let m1: f64 = x.values().column(1).sum() / n as f64;
        let mut cross = 0.0;
        for i in 0..n {
            cross += (x.values()[(i, 0)] - m0) * (x.values()[(i, 1)] - m1);
        }
        cross /= (n - 1) as f64;
        assert!(cross.abs() < 4.0 / (n as f64).sqrt(), "cross-corr {cross}");
    }

    #[test]
    fn ln_entries_are_positive() {
        let spec = DataSpec::new(DistKind::Ln, 2_000, 5, 11);
        let x = gen_design(&spec).unwrap();
        assert!(x.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn t1_maximum_grows_with_n() {
        let max_abs = |n: usize| {
            let spec = DataSpec::new(DistKind::T1, n, 2, 31);
            let x = gen_design(&spec).unwrap();
            x.values().iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
        };
        let m3 = max_abs(1_000);
        let m4 = max_abs(10_000);
        let m5 = max_abs(100_000);
        assert!(m4 > m3, "m4 = {m4} <= m3 = {m3}");
        assert!(m5 > m4, "m5 = {m5} <= m4 = {m4}");
    }

    #[test]
    fn noncentral_variant_differs_from_location_shift() {
        let base = DataSpec::new(DistKind::T3, 100, 3, 8);
        let shifted = gen_design(&base).unwrap();
        let mut variant = base;
        variant.t_noncentral = true;
        let noncentral = gen_design(&variant).unwrap();
        assert_ne!(shifted.values(), noncentral.values());
    }

    #[test]
    fn noiseless_response_is_exact() {
        let spec = DataSpec::new(DistKind::Mn, 30, 4, 3);
        let x = gen_design(&spec).unwrap();
        let beta = default_beta0(4).unwrap();
        let y = gen_response(&x, &beta, 0.0, 0).unwrap();
        let expected = x.values() * &beta;
        assert!((y.values() - expected).amax() < 1e-15);
    }

    #[test]
    fn response_noise_has_near_zero_mean() {
        let spec = DataSpec::new(DistKind::Mn, 100_000, 4, 17);
        let x = gen_design(&spec).unwrap();
        let beta = default_beta0(4).unwrap();
        let sigma = 2.0;
        let y = gen_response(&x, &beta, sigma, 23).unwrap();
        let noise = y.values() - x.values() * &beta;
        let mean = noise.sum() / noise.len() as f64;
        assert!(
            mean.abs() < 4.0 * sigma / (noise.len() as f64).sqrt(),
            "noise mean {mean}"
        );
        let var = noise.norm_squared() / noise.len() as f64;
        assert_relative_eq!(var, sigma * sigma, epsilon = 0.1);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(gen_design(&DataSpec::new(DistKind::Mn, 4, 4, 0)).is_err());
        assert!(gen_design(&DataSpec::new(DistKind::Mn, 10, 2, 0).with_rho(1.0)).is_err());
        assert!(gen_design(&DataSpec::new(DistKind::Mn, 10, 2, 0).with_sigma(0.0)).is_err());

        let x = gen_design(&DataSpec::new(DistKind::Mn, 10, 4, 0)).unwrap();
        let beta = default_beta0(5).unwrap();
        assert!(matches!(
            gen_response(&x, &beta, 1.0, 0),
            Err(Error::DimensionMismatch {
                expected: 4,
                got: 5
            })
        ));
    }
}
