//! Subsampling estimators for large-scale least squares.
//!
//! The crate implements the full pipeline around the weighted subsample
//! estimator: draw `r` rows with replacement from an `n x p` regression
//! problem under one of nine probability schemes, solve the reweighted
//! least-squares problem on the subsample, and reason about the result
//! through asymptotic covariance matrices, AMSE/EAMSE objectives, normal
//! confidence intervals, and a seeded Monte Carlo bias/variance harness.
//!
//! Modules:
//!
//! * [`linalg`] — OLS, leverage scores, and per-row design statistics.
//! * [`probs`] — the sampling probability schemes (UNIF, BLEV, SLEV, IC, RL,
//!   PL, and their negative-leverage variants).
//! * [`sampler`] — multinomial draws and the weighted subsample solver.
//! * [`asymptotics`] — covariance sandwiches, AMSE/EAMSE, optimality checks,
//!   confidence intervals, regularity diagnostics.
//! * [`datagen`] — synthetic designs (normal, t, log-normal rows).
//! * [`harness`] — the experiment engine, CSV ingestion, and reports.
//! * [`stats`] — normal quantile/CDF and the Kolmogorov-Smirnov statistic.
//! * [`rng`] — seed derivation and exact categorical samplers.

pub mod asymptotics;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod probs;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use asymptotics::{
    amse, check_regularity, conditional_covariance, confidence_intervals, eamse,
    unconditional_covariance, verify_optimal_probs, AsymptoticCovariance, ConfidenceInterval,
    CovarianceMode, OptimalityReport, RegularityDiagnostics, RegularityFlag, Target,
};
pub use datagen::{default_beta0, gen_design, gen_response, DataSpec, DistKind};
pub use error::{Error, Result};
pub use harness::{
    load_csv, run_experiment, write_report, CsvOptions, DataSource, ExperimentConfig,
    ExperimentReport, Mode, ReportCell, ReportFormat,
};
pub use linalg::{
    gram_inverse, gram_inverse_row_norms, leverage_scores, ols_fit, row_norms, DesignMatrix,
    OlsFit, ResponseVector,
};
pub use probs::{build_probs, shrinkage_report, ProbabilityVector, SchemeKind, SchemeSpec};
pub use sampler::{
    draw_subsample, weighted_ls, weighted_ls_matrix_form, SubsampleDraw, SubsampleEstimate,
};

/// Name of the environment variable that overrides the master seed when no
/// seed flag is given on the command line.
pub const SEED_ENV_VAR: &str = "LEVSAMPLE_SEED";
