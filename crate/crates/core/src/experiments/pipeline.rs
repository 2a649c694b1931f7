use std::time::Instant;

use rayon::prelude::*;

use super::benchmark::{fit_model, metric, prepared_dataset, split_dataset};
use super::convergence::elapsed_ms;
use super::{fmt_f, mean_stderr, rep_rng, ExperimentConfig, ExperimentResult, ResultRow};
use crate::data::Dataset;
use crate::features::{
    algorithm1_from_pool, build_feature_matrix, sample_plain, ExactGram, Scheme,
};
use crate::Result;

/// Two-stage evaluation of approximate leverage weighting.
///
/// Stage 1 draws a pool of `s` spectral features, fits it with `lambda` and
/// scores it against its own approximate Gram matrix. Stage 2 keeps `l`
/// features chosen by the configured rule and refits them with `lambda*`.
/// Each repetition emits a `plain` row for the full pool (`s` features) and
/// an `approx_leverage` row for the compressed model (`l` features); the
/// summary records both regularisers and the mean compression ratio `l / s`.
pub fn run_algorithm1_pipeline(
    config: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<ExperimentResult> {
    config.validate()?;
    let data = prepared_dataset(config, dataset)?;
    let per_rep: Vec<Vec<ResultRow>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            pipeline_repetition(config, &data, rep).inspect_err(|e| {
                log::error!(
                    "pipeline failed at rep = {rep}, seed = {}: {e}",
                    config.seed
                )
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ResultRow> = per_rep.into_iter().flatten().collect();

    let mut result = ExperimentResult::default();
    result
        .summary
        .push(("experiment".into(), "pipeline".into()));
    result.summary.push(("dataset".into(), data.name.clone()));
    result
        .summary
        .push(("lambda_rule".into(), config.lambda_rule.to_string()));
    result.summary.push((
        "lambda_star_rule".into(),
        config.lambda_star_rule.to_string(),
    ));
    result
        .summary
        .push(("l_rule".into(), format!("{:?}", config.algorithm1.l_rule)));
    result.summary.push((
        "selection".into(),
        format!("{:?}", config.algorithm1.selection),
    ));
    let pool: Vec<&ResultRow> = rows.iter().filter(|r| r.scheme == Scheme::Plain).collect();
    let comp: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.scheme == Scheme::ApproxLeverage)
        .collect();
    let ratios: Vec<f64> = pool
        .iter()
        .zip(&comp)
        .map(|(p, c)| c.s as f64 / p.s as f64)
        .collect();
    let (ratio, _) = mean_stderr(&ratios);
    let (pool_mean, pool_se) = mean_stderr(&pool.iter().map(|r| r.test_metric).collect::<Vec<_>>());
    let (comp_mean, comp_se) = mean_stderr(&comp.iter().map(|r| r.test_metric).collect::<Vec<_>>());
    result
        .summary
        .push(("mean_compression".into(), fmt_f(ratio)));
    result.summary.push((
        "mean_test[pool]".into(),
        format!("{} +- {}", fmt_f(pool_mean), fmt_f(2.0 * pool_se)),
    ));
    result.summary.push((
        "mean_test[compressed]".into(),
        format!("{} +- {}", fmt_f(comp_mean), fmt_f(2.0 * comp_se)),
    ));
    result
        .summary
        .push(("test_ratio".into(), fmt_f(comp_mean / pool_mean)));
    result.rows = rows;
    Ok(result)
}

fn pipeline_repetition(
    config: &ExperimentConfig,
    data: &Dataset,
    rep: usize,
) -> Result<Vec<ResultRow>> {
    let mut rng = rep_rng(config.seed, rep, 0);
    let split = split_dataset(config, data, &mut rng)?;
    let spec = config.kernel_for(&split.train)?;
    let x = &split.train.x;
    let n = split.train.n();
    let lambda = config.lambda_rule.lambda(n);
    let lambda_star = config.lambda_star_rule.lambda(n);
    let dof = if config.s_rule.needs_dof() {
        ExactGram::for_kernel(&spec, x)?.dof(lambda)?
    } else {
        f64::NAN
    };
    let s = config.s_rule.count(dof, lambda, spec.z0(), Scheme::Plain)?;

    let start = Instant::now();
    let mut pool = sample_plain(&spec, s, &mut rng)?;
    pool.source_seed = config.seed ^ rep as u64;
    let z = build_feature_matrix(&pool, &spec, x)?;
    let full = fit_model(config, &z, &split.train.y, lambda)?;
    let pool_row = ResultRow {
        n,
        lambda,
        s,
        scheme: Scheme::Plain,
        rep,
        train_metric: metric(config.loss, &full.decision_values(&z)?, &split.train.y),
        test_metric: metric(
            config.loss,
            &full.predict_with(&spec, &pool, &split.test.x)?,
            &split.test.y,
        ),
        excess_risk: f64::NAN,
        wall_time_ms: elapsed_ms(start, config.timing),
    };

    let start = Instant::now();
    let (mut kept, _profile) =
        algorithm1_from_pool(&spec, x, &pool, lambda, &mut rng, config.algorithm1)?;
    kept.source_seed = config.seed ^ rep as u64;
    let zl = build_feature_matrix(&kept, &spec, x)?;
    let compressed = fit_model(config, &zl, &split.train.y, lambda_star)?;
    let comp_row = ResultRow {
        n,
        lambda: lambda_star,
        s: kept.len(),
        scheme: Scheme::ApproxLeverage,
        rep,
        train_metric: metric(
            config.loss,
            &compressed.decision_values(&zl)?,
            &split.train.y,
        ),
        test_metric: metric(
            config.loss,
            &compressed.predict_with(&spec, &kept, &split.test.x)?,
            &split.test.y,
        ),
        excess_risk: f64::NAN,
        wall_time_ms: elapsed_ms(start, config.timing),
    };
    Ok(vec![pool_row, comp_row])
}
