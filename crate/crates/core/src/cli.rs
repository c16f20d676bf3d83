//! Command-line interface: probability vectors, one-shot estimates, Monte
//! Carlo experiments, synthetic data dumps, and regularity diagnostics.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::asymptotics::{
    check_regularity, conditional_covariance, confidence_intervals, ConfidenceInterval,
};
use crate::datagen::{DataSpec, DistKind, DEFAULT_RHO, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::harness::format_f64;
use crate::harness::{
    estimate_once, load_csv, run_experiment, synthetic_dataset, write_dataset_csv, write_report,
    CsvOptions, ExperimentConfig, ReportFormat,
};
use crate::linalg::{ols_fit, DesignMatrix, ResponseVector};
use crate::probs::{build_probs, SchemeKind, SchemeSpec, DEFAULT_SLEV_LAMBDA};
use crate::SEED_ENV_VAR;

#[derive(Parser)]
#[command(
    name = "levsample",
    version,
    about = "Subsampled least-squares estimators: sampling schemes, weighted solves, and Monte Carlo verification",
    after_help = "Exit codes: 0 ok, 2 input error, 3 numerical failure.\n\
                  LEVSAMPLE_SEED overrides the master seed when no seed flag is given."
)]
pub struct Cli {
    /// Worker threads for experiment replicates (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Numeric CSV file with the regression data.
    #[arg(long)]
    input: PathBuf,
    /// Zero-based response column.
    #[arg(long, default_value_t = 0)]
    response: usize,
    /// Skip the first line of the file.
    #[arg(long)]
    header: bool,
    /// Prepend an intercept column of ones.
    #[arg(long)]
    intercept: bool,
    /// Append squares and pairwise products of the predictors.
    #[arg(long)]
    expand: bool,
}

impl InputArgs {
    fn load(&self) -> Result<(DesignMatrix, ResponseVector)> {
        load_csv(
            &self.input,
            &CsvOptions {
                response_column: self.response,
                header: self.header,
                add_intercept: self.intercept,
                expand_features: self.expand,
            },
        )
    }
}

#[derive(Args)]
struct SchemeArgs {
    /// Sampling scheme: unif, blev, slev, ic, rl, pl, icnlev, rlnlev, plnlev.
    #[arg(long)]
    scheme: SchemeKind,
    /// Probability floor as a fraction of 1/n.
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
    /// Shrinkage weight for slev.
    #[arg(long, default_value_t = DEFAULT_SLEV_LAMBDA)]
    slev_lambda: f64,
}

impl SchemeArgs {
    fn spec(&self) -> SchemeSpec {
        SchemeSpec::new(self.scheme)
            .with_lambda(self.slev_lambda)
            .with_floor(self.floor)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute a sampling probability vector for a dataset.
    Probs {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format: csv or json.
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
    /// Draw one subsample and solve the weighted least-squares problem.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Subsample size.
        #[arg(long)]
        r: usize,
        /// Master seed (falls back to LEVSAMPLE_SEED, then 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Confidence level for per-coordinate intervals.
        #[arg(long)]
        ci: Option<f64>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format: json or csv.
        #[arg(long, default_value = "json")]
        format: ReportFormat,
    },
    /// Run a Monte Carlo bias/variance experiment from a JSON config.
    Experiment {
        /// JSON serialization of the experiment config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Output format: csv or json.
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
    /// Generate a synthetic dataset and dump it as CSV (response first).
    Gen {
        /// Distribution of the predictor rows: mn, t3, ln, t1.
        #[arg(long)]
        dist: DistKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        /// Use the classical noncentral-t construction for t3/t1.
        #[arg(long)]
        t_noncentral: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print regularity diagnostics for a dataset and scheme.
    Diagnose {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Subsample size the diagnostics refer to.
        #[arg(long)]
        r: usize,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV_VAR)
        .ok()
        .and_then(|s| s.parse().ok())
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(env_seed).unwrap_or(0)
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ProbsOutput {
    scheme: SchemeSpec,
    pi: Vec<f64>,
}

#[derive(Serialize)]
struct EstimateOutput {
    scheme: SchemeSpec,
    r: usize,
    seed: u64,
    beta_tilde: Vec<f64>,
    /// Noise variance estimated from the full sample.
    sigma2_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intervals: Option<Vec<ConfidenceInterval>>,
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Ignore the error if a pool already exists (repeated calls in-process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }

    match cli.command {
        Command::Probs {
            input,
            scheme,
            out,
            format,
        } => {
            let (x, y) = input.load()?;
            let fit = ols_fit(&x, &y)?;
            let pi = build_probs(&x, &fit, scheme.spec())?;
            let text = match format {
                ReportFormat::Csv => {
                    let mut text = String::from("row,pi\n");
                    for (i, &v) in pi.pi().iter().enumerate() {
                        text.push_str(&format!("{i},{}\n", format_f64(v)));
                    }
                    text
                }
                ReportFormat::Json => {
                    let payload = ProbsOutput {
                        scheme: pi.scheme(),
                        pi: pi.pi().iter().copied().collect(),
                    };
                    let mut s = serde_json::to_string_pretty(&payload)?;
                    s.push('\n');
                    s
                }
            };
            emit(out.as_ref(), &text)
        }
        Command::Estimate {
            input,
            scheme,
            r,
            seed,
            ci,
            out,
            format,
        } => {
            let (x, y) = input.load()?;
            let fit = ols_fit(&x, &y)?;
            let spec = scheme.spec();
            let seed = resolve_seed(seed);
            let estimate = estimate_once(&x, &y, &fit, spec, r, seed)?;
            let intervals = match ci {
                Some(level) => {
                    let pi = build_probs(&x, &fit, spec)?;
                    let cov = conditional_covariance(&x, &fit.residuals, &pi, r)?;
                    Some(confidence_intervals(&estimate, &cov, level)?)
                }
                None => None,
            };
            let payload = EstimateOutput {
                scheme: spec,
                r,
                seed,
                beta_tilde: estimate.beta_tilde.iter().copied().collect(),
                sigma2_hat: fit.sigma2_hat,
                ci_level: ci,
                intervals: intervals.clone(),
            };
            let text = match format {
                ReportFormat::Json => {
                    let mut s = serde_json::to_string_pretty(&payload)?;
                    s.push('\n');
                    s
                }
                ReportFormat::Csv => {
                    let mut text = String::from("coord,beta_tilde,ci_lower,ci_upper\n");
                    for (j, &b) in payload.beta_tilde.iter().enumerate() {
                        let (lo, hi) = match &intervals {
                            Some(iv) => (format_f64(iv[j].lower), format_f64(iv[j].upper)),
                            None => (String::new(), String::new()),
                        };
                        text.push_str(&format!("{j},{},{lo},{hi}\n", format_f64(b)));
                    }
                    text
                }
            };
            emit(out.as_ref(), &text)
        }
        Command::Experiment {
            config,
            out,
            format,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(seed) = env_seed() {
                eprintln!("note: {SEED_ENV_VAR} overrides master_seed ({seed})");
                cfg.master_seed = seed;
            }
            let report = run_experiment(&cfg)?;
            write_report(&report, &out, format)
        }
        Command::Gen {
            dist,
            n,
            p,
            seed,
            rho,
            sigma,
            t_noncentral,
            out,
        } => {
            let mut spec = DataSpec::new(dist, n, p, resolve_seed(seed))
                .with_rho(rho)
                .with_sigma(sigma);
            spec.t_noncentral = t_noncentral;
            let (x, y) = synthetic_dataset(&spec)?;
            write_dataset_csv(&out, &x, &y)
        }
        Command::Diagnose { input, scheme, r } => {
            if r < 1 {
                return Err(Error::InvalidSize);
            }
            let (x, y) = input.load()?;
            let fit = ols_fit(&x, &y)?;
            let pi = build_probs(&x, &fit, scheme.spec())?;
            let diagnostics = check_regularity(&x, &pi, r);
            println!("scheme            : {}", pi.scheme().kind);
            println!("n x p             : {} x {}", x.n_rows(), x.n_cols());
            println!("{diagnostics}");
            Ok(())
        }
    }
}
