//! Experiment drivers: the spline convergence simulation, the plain versus
//! leverage-weighted benchmark, the two-stage approximate-leverage pipeline
//! and a diagnostics sweep, all emitting CSV.
//!
//! Every repetition owns a generator seeded with `seed ^ rep` and a stream
//! index derived from its grid position, so results do not depend on how
//! repetitions are scheduled across threads.

mod benchmark;
pub mod config;
mod convergence;
pub mod csv;
mod diagnose;
mod pipeline;

use std::fmt;
use std::str::FromStr;

use crate::data::SplineSimConfig;
use crate::diagnostics::{required_features, CountRule};
use crate::estimators::{Loss, SolverOptions};
use crate::features::{Algorithm1Options, Scheme};
use crate::kernels::KernelSpec;
use crate::{seeded_rng, Error, Result, Rng};

pub use benchmark::{cv_select, run_benchmark, CvChoice};
pub use convergence::run_convergence;
pub use diagnose::{run_diagnose, DiagnoseResult, DiagnoseRow};
pub use pipeline::run_algorithm1_pipeline;

/// Regulariser as a function of the training-set size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    InvSqrtN(f64),
    InvCbrtN(f64),
    InvN(f64),
    LogNOverN(f64),
    Fixed(f64),
}

impl LambdaRule {
    pub fn lambda(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            LambdaRule::InvSqrtN(c) => c / n.sqrt(),
            LambdaRule::InvCbrtN(c) => c / n.cbrt(),
            LambdaRule::InvN(c) => c / n,
            LambdaRule::LogNOverN(c) => c * n.ln() / n,
            LambdaRule::Fixed(v) => v,
        }
    }

    /// Build from a rule name and its constant.
    pub fn parse(name: &str, constant: f64) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda constant must be positive, got {constant}"
            )));
        }
        Ok(match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "inv-sqrt-n" | "invsqrtn" | "sqrt" => LambdaRule::InvSqrtN(constant),
            "inv-cbrt-n" | "invcbrtn" | "cbrt" => LambdaRule::InvCbrtN(constant),
            "inv-n" | "invn" => LambdaRule::InvN(constant),
            "log-n-over-n" | "lognovern" => LambdaRule::LogNOverN(constant),
            "fixed" => LambdaRule::Fixed(constant),
            other => return Err(Error::invalid(format!("unknown lambda rule '{other}'"))),
        })
    }
}

/// Number of features as a function of the effective degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SRule {
    DofProportional(f64),
    CorollaryCount { delta: f64 },
    Fixed(usize),
}

impl SRule {
    /// Feature count for a scheme at effective dof `dof`.
    pub fn count(&self, dof: f64, lambda: f64, z0: f64, scheme: Scheme) -> Result<usize> {
        match *self {
            SRule::DofProportional(factor) => Ok(((factor * dof).ceil() as usize).max(1)),
            SRule::CorollaryCount { delta } => {
                let rule = match scheme {
                    Scheme::Plain => CountRule::PlainRff,
                    _ => CountRule::LeverageRff,
                };
                required_features(rule, dof, lambda, z0, delta)
            }
            SRule::Fixed(s) => Ok(s.max(1)),
        }
    }

    /// Whether the rule depends on the effective degrees of freedom.
    pub fn needs_dof(&self) -> bool {
        !matches!(self, SRule::Fixed(_))
    }

    pub fn parse(name: &str, constant: f64) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "dof" | "dof-proportional" => {
                if !(constant > 0.0) {
                    return Err(Error::invalid("dof factor must be positive"));
                }
                SRule::DofProportional(constant)
            }
            "corollary" | "corollary-count" => {
                if !(constant > 0.0 && constant < 1.0) {
                    return Err(Error::invalid("corollary rule needs a delta in (0, 1)"));
                }
                SRule::CorollaryCount { delta: constant }
            }
            "fixed" => {
                if !(constant >= 1.0) {
                    return Err(Error::invalid("fixed feature count must be at least 1"));
                }
                SRule::Fixed(constant.round() as usize)
            }
            other => return Err(Error::invalid(format!("unknown s rule '{other}'"))),
        })
    }
}

/// Full configuration of an experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub scheme: Scheme,
    pub n_grid: Vec<usize>,
    pub lambda_rule: LambdaRule,
    pub s_rule: SRule,
    pub reps: usize,
    pub seed: u64,
    pub loss: Loss,
    /// Target and noise of the spline simulation (its `n`, `r` and
    /// truncation are taken from the grid and the kernel).
    pub sim: SplineSimConfig,
    /// Fresh points used to estimate the excess risk.
    pub eval_points: usize,
    /// Exact-leverage pool size is `max(pool_factor * s, pool_min)`.
    pub pool_factor: f64,
    pub pool_min: usize,
    /// Record wall-clock times; off keeps CSV output byte-reproducible.
    pub timing: bool,
    pub solver: SolverOptions,
    /// Benchmark: feature counts and schemes to compare.
    pub s_grid: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub test_fraction: f64,
    pub folds: usize,
    pub lambda_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub standardize: bool,
    /// Exact-leverage scores are computed at `max(lambda, lambda_s)` where
    /// `d_K^{lambda_s} = s / budget`; `None` scores at the fitting lambda.
    pub leverage_budget: Option<f64>,
    pub subsample: Option<usize>,
    /// Pipeline: second-stage regulariser and approximate-leverage options.
    pub lambda_star_rule: LambdaRule,
    pub algorithm1: Algorithm1Options,
}

impl ExperimentConfig {
    /// Defaults matching the spline convergence simulation.
    pub fn spline_default() -> Self {
        let sim = SplineSimConfig::default();
        Self {
            kernel: sim.learning_kernel().expect("valid default"),
            scheme: Scheme::ExactLeverage,
            n_grid: vec![128, 256, 512, 1024, 2048, 4096],
            lambda_rule: LambdaRule::InvSqrtN(1.0),
            s_rule: SRule::DofProportional(2.0),
            reps: 20,
            seed: 0,
            loss: Loss::Squared,
            sim,
            eval_points: 10_000,
            pool_factor: 10.0,
            pool_min: 200,
            timing: false,
            solver: SolverOptions::default(),
            s_grid: vec![10, 20, 40, 80],
            schemes: vec![Scheme::Plain, Scheme::ExactLeverage],
            test_fraction: 0.3,
            folds: 5,
            lambda_grid: (0..7).map(|i| 10f64.powi(i - 6)).collect(),
            gamma_grid: (0..5).map(|i| 2f64.powi(2 * i - 4)).collect(),
            standardize: true,
            leverage_budget: Some(2.0),
            subsample: None,
            lambda_star_rule: LambdaRule::InvSqrtN(1.0),
            algorithm1: Algorithm1Options::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::invalid(
                "n grid must be nonempty with positive entries",
            ));
        }
        if self.reps == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.s_grid.contains(&0) {
            return Err(Error::invalid("feature counts must be positive"));
        }
        if !(self.pool_factor >= 1.0) {
            return Err(Error::invalid("pool factor must be at least 1"));
        }
        if self.lambda_grid.iter().any(|&l| !(l > 0.0))
            || self.gamma_grid.iter().any(|&g| !(g > 0.0))
        {
            return Err(Error::invalid("cross-validation grids must be positive"));
        }
        if self.eval_points == 0 {
            return Err(Error::invalid("evaluation sample must be nonempty"));
        }
        Ok(())
    }

    /// The configured kernel, with the Gaussian input dimension taken from
    /// the dataset.
    pub fn kernel_for(&self, data: &crate::data::Dataset) -> Result<KernelSpec> {
        match self.kernel.family() {
            crate::kernels::KernelFamily::Gaussian { gamma, .. } => {
                Ok(KernelSpec::gaussian(gamma, data.dim())?.with_style(self.kernel.style()))
            }
            crate::kernels::KernelFamily::SplineEven { .. } => {
                if data.dim() != 1 {
                    return Err(Error::Data(format!(
                        "the spline kernel needs one-dimensional inputs, dataset has {}",
                        data.dim()
                    )));
                }
                Ok(self.kernel)
            }
        }
    }

    pub(crate) fn pool_size(&self, s: usize) -> usize {
        ((self.pool_factor * s as f64).ceil() as usize)
            .max(self.pool_min)
            .max(s)
    }
}

/// One record of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub lambda: f64,
    pub s: usize,
    pub scheme: Scheme,
    pub rep: usize,
    pub train_metric: f64,
    pub test_metric: f64,
    pub excess_risk: f64,
    pub wall_time_ms: f64,
}

/// Least-squares line through `(ln n, ln risk)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    /// `key = value` lines written as trailing `#` comments.
    pub summary: Vec<(String, String)>,
    pub slope: Option<SlopeFit>,
}

impl ExperimentResult {
    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Fit `ln y = a + b ln x`; returns the slope `b`, intercept and the slope's
/// standard error (zero with two points).
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("slope fit needs at least two paired points"));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Numerical(
            "slope fit needs positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid(
            "slope fit needs at least two distinct x values",
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if lx.len() > 2 {
        let rss: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
    })
}

/// Generator for repetition `rep` at grid position `stream`.
pub fn rep_rng(seed: u64, rep: usize, stream: u64) -> Rng {
    let mut rng = seeded_rng(seed ^ rep as u64);
    rng.set_stream(stream);
    rng
}

/// Mean and standard error of a sample.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

impl fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::InvSqrtN(c) => write!(f, "inv-sqrt-n({c})"),
            LambdaRule::InvCbrtN(c) => write!(f, "inv-cbrt-n({c})"),
            LambdaRule::InvN(c) => write!(f, "inv-n({c})"),
            LambdaRule::LogNOverN(c) => write!(f, "log-n-over-n({c})"),
            LambdaRule::Fixed(v) => write!(f, "fixed({v})"),
        }
    }
}

impl fmt::Display for SRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SRule::DofProportional(c) => write!(f, "dof({c})"),
            SRule::CorollaryCount { delta } => write!(f, "corollary(delta={delta})"),
            SRule::Fixed(s) => write!(f, "fixed({s})"),
        }
    }
}

impl FromStr for LambdaRule {
    type Err = Error;

    /// Accepts `name` or `name:constant`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, c) = match s.split_once(':') {
            Some((n, c)) => (
                n,
                c.parse()
                    .map_err(|_| Error::invalid(format!("bad constant in '{s}'")))?,
            ),
            None => (s, 1.0),
        };
        LambdaRule::parse(name, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [128.0, 256.0, 512.0, 1024.0].to_vec();
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.37)).collect();
        let fit = fit_loglog_slope(&x, &y).unwrap();
        assert!((fit.slope + 0.37).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);
    }

    #[test]
    fn lambda_rules() {
        assert_eq!(LambdaRule::InvSqrtN(2.0).lambda(100), 0.2);
        assert!((LambdaRule::InvCbrtN(1.0).lambda(1000) - 0.1).abs() < 1e-15);
        assert_eq!(LambdaRule::Fixed(0.3).lambda(7), 0.3);
        assert!(LambdaRule::parse("bogus", 1.0).is_err());
        assert!(LambdaRule::parse("inv-n", 0.0).is_err());
        assert_eq!(
            "inv-sqrt-n:0.5".parse::<LambdaRule>().unwrap(),
            LambdaRule::InvSqrtN(0.5)
        );
    }

    #[test]
    fn s_rules() {
        assert_eq!(
            SRule::DofProportional(2.0)
                .count(3.2, 0.1, 1.0, Scheme::Plain)
                .unwrap(),
            7
        );
        assert_eq!(
            SRule::Fixed(12)
                .count(3.2, 0.1, 1.0, Scheme::Plain)
                .unwrap(),
            12
        );
        let lev = SRule::CorollaryCount { delta: 0.1 }
            .count(10.0, 0.01, 1.0, Scheme::ExactLeverage)
            .unwrap();
        assert_eq!(lev, 369);
    }

    #[test]
    fn rep_rng_streams_differ() {
        use rand::Rng as _;
        let a: u64 = rep_rng(1, 2, 0).random();
        let b: u64 = rep_rng(1, 2, 1).random();
        let c: u64 = rep_rng(1, 2, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
