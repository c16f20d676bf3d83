//! Asymptotic covariance matrices, AMSE/EAMSE objectives, confidence
//! intervals, and regularity diagnostics for the subsample estimator.
//!
//! Two inference settings are covered. Unconditionally (fresh data every
//! time, target is the true coefficient vector) the estimator's asymptotic
//! covariance is
//!
//! ```text
//!   sigma² [ (XᵀX)⁻¹ + (XᵀX)⁻¹ Xᵀ Ω X (XᵀX)⁻¹ ],   Ω = diag(1/(r pi_i)),
//! ```
//!
//! the full-sample OLS variance plus a sampling sandwich. Conditionally (the
//! dataset is fixed, target is the full-sample OLS solution) it is
//!
//! ```text
//!   (1/r) (XᵀX)⁻¹ ( Σ e_i²/pi_i · x_i x_iᵀ ) (XᵀX)⁻¹,
//! ```
//!
//! where the residuals carry the noise scale. Minimizing the trace of these
//! (per target transform) over the simplex of sampling probabilities yields
//! the closed-form schemes in [`crate::probs`]; `verify_optimal_probs`
//! re-checks that optimality numerically against random probability vectors.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_inverse, leverage_scores, row_norms, DesignMatrix, OlsFit};
use crate::probs::{build_probs, ProbabilityVector, SchemeKind, SchemeSpec};
use crate::rng::rng_from_seed;
use crate::sampler::SubsampleEstimate;
use crate::stats::normal_quantile;
use rand::RngExt;

/// Which randomness the covariance accounts for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    Unconditional,
    Conditional,
}

/// A symmetric positive-semidefinite covariance matrix for the subsample
/// estimator, tagged with the inference mode it belongs to.
#[derive(Debug, Clone)]
pub struct AsymptoticCovariance {
    matrix: DMatrix<f64>,
    mode: CovarianceMode,
}

impl AsymptoticCovariance {
    pub fn new(matrix: DMatrix<f64>, mode: CovarianceMode) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidArgument("covariance must be square".into()));
        }
        let scale = matrix.amax().max(1e-300);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "covariance is not symmetric: max asymmetry {asym:.3e}"
            )));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(AsymptoticCovariance { matrix, mode })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn mode(&self) -> CovarianceMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Inverse symmetric square root, for standardizing estimator draws.
    pub fn inverse_sqrt(&self) -> Result<DMatrix<f64>> {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut scaled = eig.eigenvectors.clone();
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "covariance eigenvalue {lambda:.3e} is not positive"
                )));
            }
            let inv_sqrt = 1.0 / lambda.sqrt();
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= inv_sqrt;
            }
        }
        Ok(&scaled * eig.eigenvectors.transpose())
    }
}

/// The quantity whose estimation error is being measured: the coefficients,
/// the fitted values `X beta`, or the Gram-scaled coefficients `XᵀX beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Coef,
    Fit,
    Gram,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Coef, Target::Fit, Target::Gram];

    pub fn name(self) -> &'static str {
        match self {
            Target::Coef => "coef",
            Target::Fit => "fit",
            Target::Gram => "gram",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coef" => Ok(Target::Coef),
            "fit" => Ok(Target::Fit),
            "gram" => Ok(Target::Gram),
            other => Err(Error::InvalidArgument(format!("unknown target {other:?}"))),
        }
    }
}

fn check_probabilities(pi: &ProbabilityVector, n: usize) -> Result<()> {
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.len(),
        });
    }
    for (i, &p) in pi.pi().iter().enumerate() {
        if p <= 0.0 {
            return Err(Error::ZeroProbability { index: i });
        }
    }
    Ok(())
}

/// Unconditional asymptotic covariance of the subsample estimator around the
/// true coefficients: `sigma² [(XᵀX)⁻¹ + (XᵀX)⁻¹ XᵀΩX (XᵀX)⁻¹]`.
pub fn unconditional_covariance(
    x: &DesignMatrix,
    pi: &ProbabilityVector,
    r: usize,
    sigma2: f64,
) -> Result<AsymptoticCovariance> {
    if r < 1 {
        return Err(Error::InvalidSize);
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    check_probabilities(pi, x.n_rows())?;
    let g = gram_inverse(x)?;

    // XᵀΩX assembled as BᵀB with B = Ω^{1/2} X for exact symmetry.
    let mut b = x.values().clone();
    for i in 0..b.nrows() {
        let w = 1.0 / (r as f64 * pi.pi()[i]).sqrt();
        for j in 0..b.ncols() {
            b[(i, j)] *= w;
        }
    }
    let middle = b.transpose() * &b;
    let sandwich = &g * middle * &g;
    AsymptoticCovariance::new(sigma2 * (g + sandwich), CovarianceMode::Unconditional)
}

/// Conditional asymptotic covariance of the subsample estimator around the
/// full-sample OLS solution: `(1/r)(XᵀX)⁻¹ (Σ e_i²/pi_i x_i x_iᵀ) (XᵀX)⁻¹`.
pub fn conditional_covariance(
    x: &DesignMatrix,
    residuals: &DVector<f64>,
    pi: &ProbabilityVector,
    r: usize,
) -> Result<AsymptoticCovariance> {
    if r < 1 {
        return Err(Error::InvalidSize);
    }
    let n = x.n_rows();
    if residuals.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: residuals.len(),
        });
    }
    check_probabilities(pi, n)?;
    let g = gram_inverse(x)?;

    let mut b = x.values().clone();
    for i in 0..n {
        let w = residuals[i].abs() / pi.pi()[i].sqrt();
        for j in 0..b.ncols() {
            b[(i, j)] *= w;
        }
    }
    let middle = b.transpose() * &b;
    let sandwich = (&g * middle * &g) / r as f64;
    AsymptoticCovariance::new(sandwich, CovarianceMode::Conditional)
}

/// Asymptotic mean squared error of the subsample estimator for a target,
/// as a function of the sampling probabilities (unconditional setting).
pub fn amse(
    x: &DesignMatrix,
    pi: &ProbabilityVector,
    r: usize,
    sigma2: f64,
    target: Target,
) -> Result<f64> {
    if r < 1 {
        return Err(Error::InvalidSize);
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let n = x.n_rows();
    check_probabilities(pi, n)?;
    let r = r as f64;

    Ok(match target {
        Target::Coef => {
            let g = gram_inverse(x)?;
            let scaled = x.values() * &g;
            let sampling: f64 = (0..n)
                .map(|i| scaled.row(i).norm_squared() / pi.pi()[i])
                .sum();
            sigma2 * g.trace() + sigma2 / r * sampling
        }
        Target::Fit => {
            let h = leverage_scores(x)?;
            let p = x.n_cols() as f64;
            let sampling: f64 = (0..n).map(|i| h[i] / pi.pi()[i]).sum();
            p * sigma2 + sigma2 / r * sampling
        }
        Target::Gram => {
            let norms = row_norms(x);
            let trace_gram = x.values().iter().map(|v| v * v).sum::<f64>();
            let sampling: f64 = (0..n).map(|i| norms[i] * norms[i] / pi.pi()[i]).sum();
            sigma2 * trace_gram + sigma2 / r * sampling
        }
    })
}

/// Expected asymptotic mean squared error for a target (conditional setting),
/// using `E(e_i²) = (1 - h_i) sigma²` in place of the realized residuals.
///
/// `sigma2` overrides the fit's estimated noise variance when supplied.
pub fn eamse(
    x: &DesignMatrix,
    fit: &OlsFit,
    pi: &ProbabilityVector,
    r: usize,
    target: Target,
    sigma2: Option<f64>,
) -> Result<f64> {
    if r < 1 {
        return Err(Error::InvalidSize);
    }
    let n = x.n_rows();
    check_probabilities(pi, n)?;
    if fit.leverage.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: fit.leverage.len(),
        });
    }
    let sigma2 = sigma2.unwrap_or(fit.sigma2_hat);
    if sigma2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must be nonnegative, got {sigma2}"
        )));
    }

    let weights: DVector<f64> = match target {
        Target::Coef => {
            let scaled = x.values() * &fit.gram_inverse;
            DVector::from_fn(n, |i, _| scaled.row(i).norm_squared())
        }
        Target::Fit => fit.leverage.clone(),
        Target::Gram => {
            let norms = row_norms(x);
            norms.map(|v| v * v)
        }
    };

    let mut total = 0.0;
    for i in 0..n {
        let one_minus_h = (1.0 - fit.leverage[i]).max(0.0);
        total += one_minus_h * sigma2 / pi.pi()[i] * weights[i];
    }
    Ok(total / r as f64)
}

/// Outcome of checking a closed-form optimal scheme against random
/// probability vectors.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub scheme: SchemeKind,
    pub target: Target,
    pub mode: CovarianceMode,
    pub optimal_objective: f64,
    pub trials: usize,
    /// Trials whose objective came out strictly above the optimum.
    pub strictly_worse: usize,
    /// Smallest objective gap over all trials; nonnegative when the
    /// closed-form probabilities really are the minimizer.
    pub min_gap: f64,
}

/// The scheme that minimizes the objective for a target in a given mode.
pub fn optimal_scheme(target: Target, mode: CovarianceMode) -> SchemeKind {
    match (mode, target) {
        (CovarianceMode::Unconditional, Target::Coef) => SchemeKind::Ic,
        (CovarianceMode::Unconditional, Target::Fit) => SchemeKind::Rl,
        (CovarianceMode::Unconditional, Target::Gram) => SchemeKind::Pl,
        (CovarianceMode::Conditional, Target::Coef) => SchemeKind::Icnlev,
        (CovarianceMode::Conditional, Target::Fit) => SchemeKind::Rlnlev,
        (CovarianceMode::Conditional, Target::Gram) => SchemeKind::Plnlev,
    }
}

/// Evaluate the AMSE (unconditional) or EAMSE (conditional) objective at the
/// scheme-optimal probabilities and at `trials` random simplex vectors.
#[allow(clippy::too_many_arguments)]
pub fn verify_optimal_probs(
    x: &DesignMatrix,
    fit: &OlsFit,
    r: usize,
    sigma2: f64,
    target: Target,
    mode: CovarianceMode,
    trials: usize,
    seed: u64,
) -> Result<OptimalityReport> {
    if trials < 1 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let scheme = optimal_scheme(target, mode);
    let optimal_pi = build_probs(x, fit, SchemeSpec::new(scheme))?;

    let objective = |pi: &ProbabilityVector| -> Result<f64> {
        match mode {
            CovarianceMode::Unconditional => amse(x, pi, r, sigma2, target),
            CovarianceMode::Conditional => eamse(x, fit, pi, r, target, Some(sigma2)),
        }
    };

    let optimal_objective = objective(&optimal_pi)?;
    let n = x.n_rows();
    let mut rng = rng_from_seed(seed);
    let mut strictly_worse = 0usize;
    let mut min_gap = f64::INFINITY;
    for _ in 0..trials {
        // Normalized exponentials are uniform on the simplex.
        let mut draws = DVector::from_fn(n, |_, _| {
            let u: f64 = rng.random();
            (-(1.0 - u).ln()).max(f64::MIN_POSITIVE)
        });
        let total: f64 = draws.iter().sum();
        draws /= total;
        let pi = ProbabilityVector::from_raw(draws, SchemeSpec::new(SchemeKind::Unif))?;
        let value = objective(&pi)?;
        let gap = value - optimal_objective;
        if gap > 0.0 {
            strictly_worse += 1;
        }
        min_gap = min_gap.min(gap);
    }

    Ok(OptimalityReport {
        scheme,
        target,
        mode,
        optimal_objective,
        trials,
        strictly_worse,
        min_gap,
    })
}

/// A central normal-theory confidence interval for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Per-coordinate intervals `beta_j ± z_{(1+level)/2} sqrt(cov_jj)`.
pub fn confidence_intervals(
    estimate: &SubsampleEstimate,
    cov: &AsymptoticCovariance,
    level: f64,
) -> Result<Vec<ConfidenceInterval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let p = estimate.beta_tilde.len();
    if cov.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: cov.dim(),
        });
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    Ok((0..p)
        .map(|j| {
            let half_width = z * cov.matrix()[(j, j)].max(0.0).sqrt();
            ConfidenceInterval {
                lower: estimate.beta_tilde[j] - half_width,
                upper: estimate.beta_tilde[j] + half_width,
            }
        })
        .collect())
}

/// Conditions the asymptotic theory leans on, reported as raw quantities.
/// The asymptotic exponents themselves are not identifiable from a single
/// dataset, so only the observable pieces are surfaced, with heuristic flags.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityDiagnostics {
    /// Extreme eigenvalues of XᵀX/n.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub pi_min: f64,
    pub pi_max: f64,
    pub r_over_n: f64,
    pub flags: Vec<RegularityFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegularityFlag {
    /// Some sampling probability is exactly zero.
    NonzeroProbability,
    /// `pi_min * r * n` is small, so reciprocal-probability terms may blow up.
    SmallSamplingMass,
}

impl fmt::Display for RegularityFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularityFlag::NonzeroProbability => {
                write!(f, "nonzero-probability condition violated (some pi_i = 0)")
            }
            RegularityFlag::SmallSamplingMass => {
                write!(f, "pi_min * r * n is small; variance terms may be inflated")
            }
        }
    }
}

impl fmt::Display for RegularityDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda_min(XtX/n) = {:.6e}", self.lambda_min)?;
        writeln!(f, "lambda_max(XtX/n) = {:.6e}", self.lambda_max)?;
        writeln!(f, "pi_min            = {:.6e}", self.pi_min)?;
        writeln!(f, "pi_max            = {:.6e}", self.pi_max)?;
        writeln!(f, "r/n               = {:.6e}", self.r_over_n)?;
        if self.flags.is_empty() {
            write!(f, "flags             : none")?;
        } else {
            write!(f, "flags             :")?;
            for flag in &self.flags {
                write!(f, "\n  - {flag}")?;
            }
        }
        Ok(())
    }
}

const SMALL_MASS_THRESHOLD: f64 = 10.0;

/// Eigenvalue and probability extremes feeding the regularity conditions.
pub fn check_regularity(
    x: &DesignMatrix,
    pi: &ProbabilityVector,
    r: usize,
) -> RegularityDiagnostics {
    let n = x.n_rows() as f64;
    let gram_over_n = x.values().transpose() * x.values() / n;
    let eigenvalues = gram_over_n.symmetric_eigen().eigenvalues;
    let lambda_min = eigenvalues.min();
    let lambda_max = eigenvalues.max();
    let pi_min = pi.min();
    let pi_max = pi.max();
    let mut flags = Vec::new();
    if pi_min <= 0.0 {
        flags.push(RegularityFlag::NonzeroProbability);
    }
    if pi_min * r as f64 * n < SMALL_MASS_THRESHOLD {
        flags.push(RegularityFlag::SmallSamplingMass);
    }
    RegularityDiagnostics {
        lambda_min,
        lambda_max,
        pi_min,
        pi_max,
        r_over_n: r as f64 / n,
        flags,
    }
}
