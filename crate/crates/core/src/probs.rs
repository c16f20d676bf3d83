//! The nine row-sampling probability schemes.
//!
//! Each scheme turns per-row statistics of the design matrix into a
//! probability vector over rows. UNIF, BLEV, and SLEV are the established
//! baselines; IC, RL, and PL minimize the asymptotic MSE of the subsample
//! estimator for the coefficients, the fitted values, and the Gram-scaled
//! coefficients respectively; the three NLEV variants carry an extra
//! `√(1-h_i)` factor and minimize the corresponding expected asymptotic MSE
//! when the goal is to approximate the full-sample OLS solution.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{row_norms, DesignMatrix, OlsFit};

pub const DEFAULT_SLEV_LAMBDA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Unif,
    Blev,
    Slev,
    Ic,
    Rl,
    Pl,
    Icnlev,
    Rlnlev,
    Plnlev,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 9] = [
        SchemeKind::Unif,
        SchemeKind::Blev,
        SchemeKind::Slev,
        SchemeKind::Ic,
        SchemeKind::Rl,
        SchemeKind::Pl,
        SchemeKind::Icnlev,
        SchemeKind::Rlnlev,
        SchemeKind::Plnlev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Unif => "unif",
            SchemeKind::Blev => "blev",
            SchemeKind::Slev => "slev",
            SchemeKind::Ic => "ic",
            SchemeKind::Rl => "rl",
            SchemeKind::Pl => "pl",
            SchemeKind::Icnlev => "icnlev",
            SchemeKind::Rlnlev => "rlnlev",
            SchemeKind::Plnlev => "plnlev",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sampling scheme {s:?}")))
    }
}

/// A scheme plus its tuning knobs.
///
/// `floor` is expressed as a fraction of `1/n`: a value `f` guarantees
/// `pi_i >= f/n` for every row. The default of 0 reproduces the plain scheme
/// formulas; callers whose designs contain rows with `h_i = 1` can enable a
/// small floor (for example `1e-6`) to keep the NLEV schemes well defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    #[serde(default = "default_lambda")]
    pub slev_lambda: f64,
    #[serde(default)]
    pub floor: f64,
}

fn default_lambda() -> f64 {
    DEFAULT_SLEV_LAMBDA
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind) -> Self {
        SchemeSpec {
            kind,
            slev_lambda: DEFAULT_SLEV_LAMBDA,
            floor: 0.0,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.slev_lambda = lambda;
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }
}

/// A sampling distribution over rows, tagged with the scheme that produced it.
#[derive(Debug, Clone)]
pub struct ProbabilityVector {
    pi: DVector<f64>,
    scheme: SchemeSpec,
}

impl ProbabilityVector {
    /// Wrap an externally supplied simplex vector.
    pub fn from_raw(pi: DVector<f64>, scheme: SchemeSpec) -> Result<Self> {
        let n = pi.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        let sum: f64 = pi.iter().sum();
        if pi.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        if (sum - 1.0).abs() > 1e-12 * n as f64 {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(ProbabilityVector { pi, scheme })
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn scheme(&self) -> SchemeSpec {
        self.scheme
    }

    pub fn min(&self) -> f64 {
        self.pi.min()
    }

    pub fn max(&self) -> f64 {
        self.pi.max()
    }
}

fn clamp01(h: f64) -> f64 {
    h.clamp(0.0, 1.0)
}

fn raw_scores(x: &DesignMatrix, fit: &OlsFit, spec: SchemeSpec) -> Result<DVector<f64>> {
    let n = x.n_rows();
    let h = &fit.leverage;
    Ok(match spec.kind {
        SchemeKind::Unif => DVector::from_element(n, 1.0),
        SchemeKind::Blev => h.map(clamp01),
        SchemeKind::Slev => {
            let lambda = spec.slev_lambda;
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(Error::InvalidLambda(lambda));
            }
            let h_sum: f64 = h.iter().map(|&v| clamp01(v)).sum();
            DVector::from_fn(n, |i, _| {
                lambda * clamp01(h[i]) / h_sum + (1.0 - lambda) / n as f64
            })
        }
        SchemeKind::Ic => gram_inv_norms(x, fit),
        SchemeKind::Rl => h.map(|v| clamp01(v).sqrt()),
        SchemeKind::Pl => row_norms(x),
        SchemeKind::Icnlev => {
            let norms = gram_inv_norms(x, fit);
            DVector::from_fn(n, |i, _| (1.0 - clamp01(h[i])).sqrt() * norms[i])
        }
        SchemeKind::Rlnlev => h.map(|v| {
            let hc = clamp01(v);
            ((1.0 - hc) * hc).sqrt()
        }),
        SchemeKind::Plnlev => {
            let norms = row_norms(x);
            DVector::from_fn(n, |i, _| (1.0 - clamp01(h[i])).sqrt() * norms[i])
        }
    })
}

fn gram_inv_norms(x: &DesignMatrix, fit: &OlsFit) -> DVector<f64> {
    let scaled = x.values() * &fit.gram_inverse;
    DVector::from_fn(x.n_rows(), |i, _| scaled.row(i).norm())
}

/// Raise every entry below `floor_value` to it while rescaling the rest by a
/// common factor so the vector still sums to one. The scale is chosen exactly
/// (waterfilling over the sorted entries), so the floor holds for every entry
/// after the single pass. Floored vectors necessarily deviate from the plain
/// scheme formulas.
fn apply_floor(pi: &mut DVector<f64>, floor_value: f64) {
    let n = pi.len();
    if floor_value <= 0.0 || pi.min() >= floor_value {
        return;
    }
    let mut sorted: Vec<f64> = pi.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Suffix sums of the sorted entries.
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + sorted[i];
    }
    // Find the number k of floored entries: with the k smallest pinned at the
    // floor, the scale c = (1 - k*floor)/suffix(k) must keep entry k above it.
    let mut scale = 1.0;
    for k in 0..n {
        let c = (1.0 - k as f64 * floor_value) / suffix[k];
        if c * sorted[k] >= floor_value {
            scale = c;
            break;
        }
    }
    for v in pi.iter_mut() {
        *v = (*v * scale).max(floor_value);
    }
}

/// Build the sampling probability vector for a scheme.
///
/// The fit must come from `ols_fit` on the same design. Scores are normalized
/// by their exact sum; with a positive floor the result is additionally kept
/// above `floor/n` per row.
pub fn build_probs(x: &DesignMatrix, fit: &OlsFit, spec: SchemeSpec) -> Result<ProbabilityVector> {
    let n = x.n_rows();
    if fit.leverage.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: fit.leverage.len(),
        });
    }
    if !(0.0..1.0).contains(&spec.floor) {
        return Err(Error::InvalidFloor(spec.floor));
    }

    let scores = raw_scores(x, fit, spec)?;
    let total: f64 = scores.iter().sum();
    let floor_value = spec.floor / n as f64;

    let mut pi = if total > 0.0 {
        scores / total
    } else if spec.floor > 0.0 {
        // Every raw score vanished; the floor is the only mass left.
        DVector::from_element(n, 1.0 / n as f64)
    } else {
        return Err(Error::DegenerateScheme {
            scheme: spec.kind.name(),
        });
    };

    apply_floor(&mut pi, floor_value);
    ProbabilityVector::from_raw(pi, spec)
}

/// One row of the score table relating the leverage-derived schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkageRow {
    pub leverage: f64,
    pub blev_score: f64,
    pub rl_score: f64,
    pub rlnlev_score: f64,
    pub slev_score: f64,
}

/// Per-row scheme scores as functions of the leverage score, for visualizing
/// how RL, RLNLEV, and SLEV shrink the raw leverage. The SLEV score uses the
/// default lambda of 0.9, so it equals `0.9 h_i + 0.1 p/n`.
pub fn shrinkage_report(x: &DesignMatrix, fit: &OlsFit) -> Vec<ShrinkageRow> {
    let p_over_n = x.n_cols() as f64 / x.n_rows() as f64;
    fit.leverage
        .iter()
        .map(|&h| {
            let h = clamp01(h);
            ShrinkageRow {
                leverage: h,
                blev_score: h,
                rl_score: h.sqrt(),
                rlnlev_score: ((1.0 - h) * h).sqrt(),
                slev_score: DEFAULT_SLEV_LAMBDA * h + (1.0 - DEFAULT_SLEV_LAMBDA) * p_over_n,
            }
        })
        .collect()
}
