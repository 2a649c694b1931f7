use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{
    fit_loglog_slope, fmt_f, mean_stderr, rep_rng, ExperimentConfig, ExperimentResult, ResultRow,
};
use crate::data::{generate_spline_sim, uniform_points, SplineSimConfig};
use crate::estimators::fit_ridge;
use crate::features::{
    algorithm1_from_pool, build_feature_matrix, sample_exact_leverage_with_gram, sample_plain,
    ExactGram, Scheme, WeightedFeatureSet,
};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::{Error, Result, Rng};

/// Draw `s` features with the requested scheme. `lambda_scores` is the
/// regulariser used for leverage scoring.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_scheme(
    config: &ExperimentConfig,
    scheme: Scheme,
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    gram: &ExactGram,
    lambda_scores: f64,
    s: usize,
    rng: &mut Rng,
) -> Result<WeightedFeatureSet> {
    match scheme {
        Scheme::Plain => sample_plain(spec, s, rng),
        Scheme::ExactLeverage => sample_exact_leverage_with_gram(
            gram,
            spec,
            x,
            lambda_scores,
            s,
            config.pool_size(s),
            rng,
        ),
        Scheme::ApproxLeverage => {
            let pool = sample_plain(spec, s, rng)?;
            Ok(algorithm1_from_pool(spec, x, &pool, lambda_scores, rng, config.algorithm1)?.0)
        }
    }
}

pub(crate) fn elapsed_ms(start: Instant, timing: bool) -> f64 {
    if timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// Excess-risk convergence on the spline simulation.
///
/// For each `(n, rep)`: simulate data, set `lambda` and `s` from the rules
/// (using the exact effective dof), sample features, fit ridge and estimate
/// the excess risk as the mean squared deviation from the noiseless target on
/// fresh uniform points. The summary holds the log-log slope of the mean
/// excess risk against `n`.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let KernelFamily::SplineEven { order, truncation } = config.kernel.family() else {
        return Err(Error::invalid(
            "the convergence simulation needs the spline kernel",
        ));
    };
    let tasks: Vec<(usize, usize)> = (0..config.n_grid.len())
        .flat_map(|ni| (0..config.reps).map(move |rep| (ni, rep)))
        .collect();
    let rows: Vec<ResultRow> = tasks
        .par_iter()
        .map(|&(ni, rep)| {
            let sim = SplineSimConfig {
                n: config.n_grid[ni],
                r: order / 2,
                truncation,
                ..config.sim
            };
            one_repetition(config, &sim, ni, rep).inspect_err(|e| {
                log::error!(
                    "convergence run failed at n = {}, rep = {rep}, seed = {}: {e}",
                    sim.n,
                    config.seed
                )
            })
        })
        .collect::<Result<_>>()?;

    let mut result = ExperimentResult {
        rows,
        ..Default::default()
    };
    result
        .summary
        .push(("experiment".into(), "convergence".into()));
    result
        .summary
        .push(("scheme".into(), config.scheme.to_string()));
    result
        .summary
        .push(("lambda_rule".into(), config.lambda_rule.to_string()));
    result
        .summary
        .push(("s_rule".into(), config.s_rule.to_string()));
    let mut ns = Vec::new();
    let mut means = Vec::new();
    for &n in &config.n_grid {
        let risks: Vec<f64> = result
            .rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.excess_risk)
            .collect();
        let (mean, se) = mean_stderr(&risks);
        result.summary.push((
            format!("mean_excess_risk[n={n}]"),
            format!("{} +- {}", fmt_f(mean), fmt_f(se)),
        ));
        ns.push(n as f64);
        means.push(mean);
    }
    if ns.len() >= 2 {
        let fit = fit_loglog_slope(&ns, &means)?;
        result.summary.push(("slope".into(), fmt_f(fit.slope)));
        result
            .summary
            .push(("slope_stderr".into(), fmt_f(fit.stderr)));
        result.slope = Some(fit);
    }
    Ok(result)
}

fn one_repetition(
    config: &ExperimentConfig,
    sim: &SplineSimConfig,
    ni: usize,
    rep: usize,
) -> Result<ResultRow> {
    let start = Instant::now();
    let mut rng = rep_rng(config.seed, rep, ni as u64);
    let (data, target) = generate_spline_sim(sim, &mut rng)?;
    let spec = config.kernel;
    let n = data.n();
    let lambda = config.lambda_rule.lambda(n);
    let gram = ExactGram::for_kernel(&spec, &data.x)?;
    let dof = gram.dof(lambda)?;
    let s = config.s_rule.count(dof, lambda, spec.z0(), config.scheme)?;
    let mut set = sample_scheme(
        config,
        config.scheme,
        &spec,
        &data.x,
        &gram,
        lambda,
        s,
        &mut rng,
    )?;
    set.source_seed = config.seed ^ rep as u64;
    let z = build_feature_matrix(&set, &spec, &data.x)?;
    let model = fit_ridge(&z, &data.y, lambda)?;
    let train_fit = z.values() * &model.beta;
    let train_metric = (&train_fit - &data.y).norm_squared() / n as f64;

    let x_eval = uniform_points(config.eval_points, &mut rng);
    let pred = model.predict(&x_eval)?;
    let truth = target.eval_rows(&x_eval);
    let excess_risk = (&pred - &truth).norm_squared() / config.eval_points as f64;
    let noisy = DVector::from_fn(truth.len(), |i, _| {
        let e: f64 = rng.sample(StandardNormal);
        truth[i] + sim.sigma * e
    });
    let test_metric = (&pred - noisy).norm_squared() / config.eval_points as f64;
    Ok(ResultRow {
        n,
        lambda,
        s: set.len(),
        scheme: config.scheme,
        rep,
        train_metric,
        test_metric,
        excess_risk,
        wall_time_ms: elapsed_ms(start, config.timing),
    })
}
