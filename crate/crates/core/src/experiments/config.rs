//! Flat `key = value` settings shared by config files and the command line.
//!
//! Keys use the long flag names (`n-grid`, `lambda-rule`, ...); underscores
//! are accepted in place of dashes. Command-line values are merged over the
//! file, then [`build_config`] turns the map into an [`ExperimentConfig`]
//! starting from the subcommand's defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{rep_rng, ExperimentConfig, LambdaRule, SRule};
use crate::data::{generate_spline_sim, Dataset, SIM_TRUNCATION};
use crate::estimators::Loss;
use crate::features::{LRule, Scheme, Selection};
use crate::kernels::{FeatureStyle, KernelSpec};
use crate::{Error, Result};

pub type Settings = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Benchmark,
    Pipeline,
    Diagnose,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Simulate => "simulate",
            Command::Benchmark => "benchmark",
            Command::Pipeline => "pipeline",
            Command::Diagnose => "diagnose",
        })
    }
}

/// Keys understood by [`build_config`], plus the ones the front end consumes
/// itself (`data`, `out`, `threads`, `config`, `task`).
const KNOWN_KEYS: &[&str] = &[
    "kernel",
    "gamma",
    "order",
    "truncation",
    "style",
    "scheme",
    "schemes",
    "n-grid",
    "s-grid",
    "lambda-rule",
    "lambda-const",
    "lambda-star-rule",
    "lambda-star-const",
    "s-rule",
    "s-const",
    "reps",
    "seed",
    "loss",
    "top-l",
    "l-rule",
    "l-const",
    "timing",
    "subsample",
    "sigma",
    "x0",
    "target-order",
    "sim-n",
    "eval-points",
    "pool-factor",
    "pool-min",
    "test-fraction",
    "folds",
    "lambda-grid",
    "gamma-grid",
    "standardize",
    "leverage-budget",
    "max-iter",
    "tol",
    "data",
    "out",
    "threads",
    "config",
    "task",
];

pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_settings(text: &str, origin: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            message: format!("expected 'key = value', found '{line}'"),
        })?;
        let key = normalize_key(k);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::invalid(format!(
                "{origin}:{}: unknown key '{key}'",
                i + 1
            )));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn load_settings(path: impl AsRef<Path>) -> Result<Settings> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_settings(&text, &path.display().to_string())
}

fn value<T: FromStr>(s: &Settings, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    s.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| Error::invalid(format!("bad value '{v}' for '{key}': {e}")))
        })
        .transpose()
}

fn list<T: FromStr>(s: &Settings, key: &str) -> Result<Option<Vec<T>>>
where
    T::Err: fmt::Display,
{
    s.get(key)
        .map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| {
                    p.parse::<T>()
                        .map_err(|e| Error::invalid(format!("bad entry '{p}' for '{key}': {e}")))
                })
                .collect()
        })
        .transpose()
}

fn flag(s: &Settings, key: &str) -> Result<Option<bool>> {
    s.get(key)
        .map(|v| match v.to_ascii_lowercase().as_str() {
            "" | "1" | "true" | "yes" | "on" => Ok(true),
            "0" | "false" | "no" | "off" => Ok(false),
            other => Err(Error::invalid(format!("bad boolean '{other}' for '{key}'"))),
        })
        .transpose()
}

/// Defaults of each subcommand before settings are applied.
pub fn defaults_for(command: Command) -> ExperimentConfig {
    let mut c = ExperimentConfig::spline_default();
    match command {
        Command::Simulate => {}
        Command::Benchmark => {
            c.kernel = KernelSpec::gaussian(1.0, 1).expect("valid default");
            c.reps = 10;
        }
        Command::Pipeline => {
            c.scheme = Scheme::ApproxLeverage;
            c.s_rule = SRule::Fixed(1200);
            c.reps = 10;
            c.algorithm1.l_rule = LRule::Corollary { delta: 0.1 };
        }
        Command::Diagnose => {
            c.n_grid = vec![128, 256, 512];
            c.reps = 3;
        }
    }
    c
}

/// Apply `settings` over the defaults of `command`.
pub fn build_config(command: Command, settings: &Settings) -> Result<ExperimentConfig> {
    for key in settings.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::invalid(format!("unknown setting '{key}'")));
        }
    }
    let mut c = defaults_for(command);
    let s = settings;

    if let Some(v) = value::<u32>(s, "target-order")? {
        c.sim.t = v;
    }
    if let Some(v) = value::<f64>(s, "sigma")? {
        c.sim.sigma = v;
    }
    if let Some(v) = value::<f64>(s, "x0")? {
        c.sim.x0 = v;
    }
    if let Some(v) = value::<usize>(s, "sim-n")? {
        c.sim.n = v;
    }
    let style = match s
        .get("style")
        .map(|v| v.to_ascii_lowercase().replace('_', "-"))
    {
        None => c.kernel.style(),
        Some(v) if v == "cos-plus-sin" => FeatureStyle::CosPlusSin,
        Some(v) if v == "cos-sin-pair" || v == "pair" => FeatureStyle::CosSinPair,
        Some(v) => return Err(Error::invalid(format!("unknown feature style '{v}'"))),
    };
    let kernel_name = match s.get("kernel") {
        Some(k) => k.to_ascii_lowercase(),
        None => match c.kernel.family() {
            crate::kernels::KernelFamily::Gaussian { .. } => "gaussian".into(),
            crate::kernels::KernelFamily::SplineEven { .. } => "spline".into(),
        },
    };
    let truncation = value::<usize>(s, "truncation")?.unwrap_or(SIM_TRUNCATION);
    c.kernel = match kernel_name.as_str() {
        "gaussian" | "rbf" => {
            KernelSpec::gaussian(value(s, "gamma")?.unwrap_or(1.0), 1)?.with_style(style)
        }
        "spline" => {
            let order = value::<u32>(s, "order")?.unwrap_or(2 * c.sim.r);
            if order % 2 == 0 {
                c.sim.r = order / 2;
            }
            c.sim.truncation = truncation;
            KernelSpec::spline(order, truncation)?
        }
        other => return Err(Error::invalid(format!("unknown kernel '{other}'"))),
    };

    if let Some(v) = value::<Scheme>(s, "scheme")? {
        c.scheme = v;
    }
    if let Some(v) = list::<Scheme>(s, "schemes")? {
        c.schemes = v;
    }
    if let Some(v) = list::<usize>(s, "n-grid")? {
        c.n_grid = v;
    }
    if let Some(v) = list::<usize>(s, "s-grid")? {
        c.s_grid = v;
    }
    c.lambda_rule = rule(s, "lambda-rule", "lambda-const", c.lambda_rule)?;
    c.lambda_star_rule = rule(s, "lambda-star-rule", "lambda-star-const", c.lambda_rule)?;
    if s.contains_key("s-rule") || s.contains_key("s-const") {
        let (name, default_const) = match (s.get("s-rule").map(String::as_str), c.s_rule) {
            (Some(n), _) => (n.to_string(), s_rule_default_const(n)),
            (None, SRule::DofProportional(f)) => ("dof".into(), f),
            (None, SRule::CorollaryCount { delta }) => ("corollary".into(), delta),
            (None, SRule::Fixed(n)) => ("fixed".into(), n as f64),
        };
        c.s_rule = SRule::parse(&name, value(s, "s-const")?.unwrap_or(default_const))?;
    }
    if let Some(v) = value(s, "reps")? {
        c.reps = v;
    }
    if let Some(v) = value(s, "seed")? {
        c.seed = v;
    }
    if let Some(v) = value::<Loss>(s, "loss")? {
        c.loss = v;
    }
    if flag(s, "top-l")? == Some(true) {
        c.algorithm1.selection = Selection::TopL;
    }
    if let Some(name) = s.get("l-rule") {
        let k = value::<f64>(s, "l-const")?;
        c.algorithm1.l_rule = match name.to_ascii_lowercase().as_str() {
            "total" => LRule::Total,
            "dof" => LRule::Dof,
            "corollary" => {
                let delta = k.unwrap_or(0.1);
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::invalid("corollary l rule needs a delta in (0, 1)"));
                }
                LRule::Corollary { delta }
            }
            "fixed" => match k {
                Some(l) if l >= 1.0 => LRule::Fixed(l.round() as usize),
                _ => return Err(Error::invalid("fixed l rule needs l-const >= 1")),
            },
            other => return Err(Error::invalid(format!("unknown l rule '{other}'"))),
        };
    }
    if let Some(v) = flag(s, "timing")? {
        c.timing = v;
    }
    if let Some(v) = value(s, "subsample")? {
        c.subsample = Some(v);
    }
    if let Some(v) = value(s, "eval-points")? {
        c.eval_points = v;
    }
    if let Some(v) = value(s, "pool-factor")? {
        c.pool_factor = v;
    }
    if let Some(v) = value(s, "pool-min")? {
        c.pool_min = v;
    }
    if let Some(v) = value(s, "test-fraction")? {
        c.test_fraction = v;
    }
    if let Some(v) = value(s, "folds")? {
        c.folds = v;
    }
    if let Some(v) = list(s, "lambda-grid")? {
        c.lambda_grid = v;
    }
    if let Some(v) = list(s, "gamma-grid")? {
        c.gamma_grid = v;
    }
    if let Some(v) = flag(s, "standardize")? {
        c.standardize = v;
    }
    if let Some(v) = s.get("leverage-budget") {
        c.leverage_budget = match v.to_ascii_lowercase().as_str() {
            "none" | "off" => None,
            _ => Some(value(s, "leverage-budget")?.expect("present")),
        };
    }
    if let Some(v) = value(s, "max-iter")? {
        c.solver.max_iter = v;
    }
    if let Some(v) = value(s, "tol")? {
        c.solver.tol = v;
    }
    c.sim.validate()?;
    c.validate()?;
    Ok(c)
}

fn s_rule_default_const(name: &str) -> f64 {
    match name.to_ascii_lowercase().as_str() {
        "corollary" | "corollary-count" => 0.1,
        "fixed" => 100.0,
        _ => 2.0,
    }
}

fn rule(s: &Settings, name_key: &str, const_key: &str, fallback: LambdaRule) -> Result<LambdaRule> {
    let constant = value::<f64>(s, const_key)?;
    match s.get(name_key) {
        Some(name) => LambdaRule::parse(name, constant.unwrap_or(1.0)),
        None => match constant {
            None => Ok(fallback),
            Some(c) => LambdaRule::parse(rule_name(fallback), c),
        },
    }
}

fn rule_name(rule: LambdaRule) -> &'static str {
    match rule {
        LambdaRule::InvSqrtN(_) => "inv-sqrt-n",
        LambdaRule::InvCbrtN(_) => "inv-cbrt-n",
        LambdaRule::InvN(_) => "inv-n",
        LambdaRule::LogNOverN(_) => "log-n-over-n",
        LambdaRule::Fixed(_) => "fixed",
    }
}

/// Spline simulation of size `sim.n`, used when no dataset is supplied.
pub fn simulated_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let mut rng = rep_rng(config.seed, 0, u64::MAX - 1);
    Ok(generate_spline_sim(&config.sim, &mut rng)?.0)
}
