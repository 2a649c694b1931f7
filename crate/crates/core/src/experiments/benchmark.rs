use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::convergence::{elapsed_ms, sample_scheme};
use super::{fmt_f, mean_stderr, rep_rng, ExperimentConfig, ExperimentResult, ResultRow};
use crate::data::{make_folds, select_rows, standardize, train_test_split, Dataset, Task};
use crate::estimators::{fit_lipschitz, fit_ridge, sign, LinearModel, Loss};
use crate::features::{build_feature_matrix, ExactGram, Scheme};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::linalg::sym_eigen;
use crate::{Error, Result, Rng};

/// Hyperparameters picked by cross-validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvChoice {
    pub lambda: f64,
    pub kernel: KernelSpec,
    pub cv_error: f64,
}

fn candidate_kernels(config: &ExperimentConfig, dim: usize) -> Result<Vec<KernelSpec>> {
    match config.kernel.family() {
        KernelFamily::Gaussian { .. } => config
            .gamma_grid
            .iter()
            .map(|&g| Ok(KernelSpec::gaussian(g, dim)?.with_style(config.kernel.style())))
            .collect(),
        KernelFamily::SplineEven { .. } => Ok(vec![config.kernel]),
    }
}

/// `k`-fold cross-validation of exact kernel ridge regression over the
/// lambda grid (and the Gaussian bandwidth grid). One eigendecomposition per
/// (fold, kernel) serves the whole lambda grid. Classification scores the
/// sign of the regression fit against the labels.
pub fn cv_select(config: &ExperimentConfig, train: &Dataset, rng: &mut Rng) -> Result<CvChoice> {
    let kernels = candidate_kernels(config, train.dim())?;
    let folds = make_folds(train.n(), config.folds, rng)?;
    let n = train.n();
    let jobs: Vec<(usize, usize)> = (0..kernels.len())
        .flat_map(|ki| (0..folds.len()).map(move |fi| (ki, fi)))
        .collect();
    let classification = train.task == Task::Classification;
    let per_job: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(ki, fi)| {
            let val = &folds[fi];
            let fit_idx: Vec<usize> = (0..n).filter(|i| val.binary_search(i).is_err()).collect();
            let x_fit = select_rows(&train.x, &fit_idx);
            let y_fit = DVector::from_iterator(fit_idx.len(), fit_idx.iter().map(|&i| train.y[i]));
            let x_val = select_rows(&train.x, val);
            let spec = kernels[ki];
            let k_fit = spec.gram(&x_fit)?;
            let k_val = spec.cross_gram(&x_val, &x_fit)?;
            let eig = sym_eigen(&k_fit);
            let uty = eig.vectors.tr_mul(&y_fit);
            let kv_u = &k_val * &eig.vectors;
            let m = fit_idx.len() as f64;
            Ok(config
                .lambda_grid
                .iter()
                .map(|&lambda| {
                    let c = m * lambda;
                    let coef =
                        DVector::from_fn(uty.len(), |i, _| uty[i] / (eig.values[i].max(0.0) + c));
                    let pred = &kv_u * coef;
                    val.iter()
                        .enumerate()
                        .map(|(j, &i)| {
                            if classification {
                                f64::from(u8::from(sign(pred[j]) != train.y[i]))
                            } else {
                                (pred[j] - train.y[i]).powi(2)
                            }
                        })
                        .sum::<f64>()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut best: Option<CvChoice> = None;
    for (ki, kernel) in kernels.iter().enumerate() {
        for (li, &lambda) in config.lambda_grid.iter().enumerate() {
            let total: f64 = jobs
                .iter()
                .zip(&per_job)
                .filter(|((k, _), _)| *k == ki)
                .map(|(_, errs)| errs[li])
                .sum::<f64>()
                / n as f64;
            if best.is_none_or(|b| total < b.cv_error) {
                best = Some(CvChoice {
                    lambda,
                    kernel: *kernel,
                    cv_error: total,
                });
            }
        }
    }
    best.ok_or_else(|| Error::invalid("empty cross-validation grid"))
}

pub(crate) fn check_task(loss: Loss, task: Task) -> Result<()> {
    match (loss.is_classification(), task) {
        (false, Task::Regression) | (true, Task::Classification) => Ok(()),
        _ => Err(Error::Data(format!(
            "loss '{loss}' does not match a {task} dataset"
        ))),
    }
}

pub(crate) fn fit_model(
    config: &ExperimentConfig,
    z: &crate::features::FeatureMatrix,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<LinearModel> {
    match config.loss {
        Loss::Squared => fit_ridge(z, y, lambda),
        loss => fit_lipschitz(z, y, loss, lambda, config.solver),
    }
}

/// RMSE for regression, misclassification rate for classification.
pub(crate) fn metric(loss: Loss, pred: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    if loss.is_classification() {
        pred.iter()
            .zip(y.iter())
            .filter(|(p, t)| sign(**p) != **t)
            .count() as f64
            / n
    } else {
        ((pred - y).norm_squared() / n).sqrt()
    }
}

pub(crate) struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

pub(crate) fn split_dataset(
    config: &ExperimentConfig,
    data: &Dataset,
    rng: &mut Rng,
) -> Result<Split> {
    let (tr, te) = train_test_split(data.n(), config.test_fraction, rng)?;
    let mut train = data.subset(&tr);
    let mut test = data.subset(&te);
    if config.standardize && matches!(config.kernel.family(), KernelFamily::Gaussian { .. }) {
        let (std_train, transform) = standardize(&train)?;
        test.x = transform.apply(&test.x)?;
        train = std_train;
    }
    Ok(Split { train, test })
}

pub(crate) fn prepared_dataset(config: &ExperimentConfig, data: &Dataset) -> Result<Dataset> {
    check_task(config.loss, data.task)?;
    Ok(match config.subsample {
        Some(m) => data.subsample(m, &mut rep_rng(config.seed, 0, u64::MAX)),
        None => data.clone(),
    })
}

fn scheme_stream(scheme: Scheme) -> u64 {
    match scheme {
        Scheme::Plain => 0,
        Scheme::ExactLeverage => 1,
        Scheme::ApproxLeverage => 2,
    }
}

/// Plain versus weighted feature sampling on a dataset.
///
/// Each repetition splits the data, standardises the inputs for the Gaussian
/// kernel (when enabled), picks hyperparameters by cross-validated exact
/// kernel ridge regression and then fits every scheme at every feature count
/// with those hyperparameters. The test metric is RMSE against the held-out
/// responses (regression) or the misclassification rate (classification).
pub fn run_benchmark(config: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentResult> {
    config.validate()?;
    if config.s_grid.is_empty() || config.schemes.is_empty() {
        return Err(Error::invalid("benchmark needs feature counts and schemes"));
    }
    let data = prepared_dataset(config, dataset)?;
    let per_rep: Vec<(Vec<ResultRow>, CvChoice)> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            benchmark_repetition(config, &data, rep).inspect_err(|e| {
                log::error!(
                    "benchmark failed at rep = {rep}, seed = {}: {e}",
                    config.seed
                )
            })
        })
        .collect::<Result<_>>()?;

    let mut result = ExperimentResult::default();
    result
        .summary
        .push(("experiment".into(), "benchmark".into()));
    result.summary.push(("dataset".into(), data.name.clone()));
    result.summary.push(("n".into(), data.n().to_string()));
    result.summary.push((
        "standardized".into(),
        (config.standardize && matches!(config.kernel.family(), KernelFamily::Gaussian { .. }))
            .to_string(),
    ));
    result
        .summary
        .push(("test_fraction".into(), config.test_fraction.to_string()));
    if let Some(m) = config.subsample {
        result.summary.push(("subsample".into(), m.to_string()));
    }
    for (rep, (rows, choice)) in per_rep.into_iter().enumerate() {
        let gamma = match choice.kernel.family() {
            KernelFamily::Gaussian { gamma, .. } => fmt_f(gamma),
            KernelFamily::SplineEven { .. } => "-".into(),
        };
        result.summary.push((
            format!("cv[rep={rep}]"),
            format!("lambda={} gamma={gamma}", fmt_f(choice.lambda)),
        ));
        result.rows.extend(rows);
    }
    for &scheme in &config.schemes {
        for &s in &config.s_grid {
            let vals: Vec<f64> = result
                .rows
                .iter()
                .filter(|r| r.scheme == scheme && r.s == s)
                .map(|r| r.test_metric)
                .collect();
            let (mean, se) = mean_stderr(&vals);
            result.summary.push((
                format!("mean_test[{scheme},s={s}]"),
                format!("{} +- {}", fmt_f(mean), fmt_f(2.0 * se)),
            ));
        }
    }
    Ok(result)
}

fn benchmark_repetition(
    config: &ExperimentConfig,
    data: &Dataset,
    rep: usize,
) -> Result<(Vec<ResultRow>, CvChoice)> {
    let mut rng = rep_rng(config.seed, rep, 0);
    let split = split_dataset(config, data, &mut rng)?;
    let choice = cv_select(config, &split.train, &mut rng)?;
    let spec = choice.kernel;
    let lambda = choice.lambda;
    let x = &split.train.x;
    let gram = ExactGram::for_kernel(&spec, x)?;
    let mut rows = Vec::new();
    for (si, &s) in config.s_grid.iter().enumerate() {
        for &scheme in &config.schemes {
            let start = Instant::now();
            let mut srng = rep_rng(config.seed, rep, 1 + 16 * si as u64 + scheme_stream(scheme));
            let lambda_scores = match (scheme, config.leverage_budget) {
                (Scheme::Plain, _) | (_, None) => lambda,
                (_, Some(b)) => lambda.max(gram.lambda_for_dof(s as f64 / b)),
            };
            let mut set =
                sample_scheme(config, scheme, &spec, x, &gram, lambda_scores, s, &mut srng)?;
            set.source_seed = config.seed ^ rep as u64;
            let z = build_feature_matrix(&set, &spec, x)?;
            let model = fit_model(config, &z, &split.train.y, lambda)?;
            let train_pred = model.decision_values(&z)?;
            let test_pred = model.predict_with(&spec, &set, &split.test.x)?;
            rows.push(ResultRow {
                n: split.train.n(),
                lambda,
                s,
                scheme,
                rep,
                train_metric: metric(config.loss, &train_pred, &split.train.y),
                test_metric: metric(config.loss, &test_pred, &split.test.y),
                excess_risk: f64::NAN,
                wall_time_ms: elapsed_ms(start, config.timing),
            });
        }
    }
    Ok((rows, choice))
}
