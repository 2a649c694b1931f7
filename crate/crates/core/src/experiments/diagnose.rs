use rayon::prelude::*;

use super::{rep_rng, ExperimentConfig};
use crate::data::{generate_spline_sim, Dataset, SplineSimConfig};
use crate::diagnostics::{
    fixed_point_bound, required_features, whitened_error_norm, CountRule, DecayReport,
};
use crate::features::{
    algorithm1_from_pool, approx_gram, build_feature_matrix, effective_dof, sample_plain,
    ExactGram, Scheme,
};
use crate::kernels::KernelFamily;
use crate::Result;

use super::convergence::sample_scheme;

/// One diagnostics record.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseRow {
    pub n: usize,
    pub lambda: f64,
    pub s: usize,
    pub scheme: Scheme,
    pub rep: usize,
    /// `d_K^lambda` of the exact Gram matrix.
    pub dof: f64,
    /// `d_{K~}^lambda` of the sampled approximation.
    pub dof_approx: f64,
    /// Sum of the approximate leverage scores of a plain pool of size `s`.
    pub leverage_total: f64,
    pub whitened_error_norm: f64,
    pub required_plain: usize,
    pub required_leverage: usize,
    pub fixed_point_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnoseResult {
    pub rows: Vec<DiagnoseRow>,
    pub summary: Vec<(String, String)>,
}

/// Failure probability used for the reported feature counts.
const DIAGNOSE_DELTA: f64 = 0.1;

/// Leverage, dof and concentration diagnostics over the `n` grid.
///
/// Uses the spline simulation, or when a dataset is given, random subsamples
/// of it of each grid size.
pub fn run_diagnose(
    config: &ExperimentConfig,
    dataset: Option<&Dataset>,
) -> Result<DiagnoseResult> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = (0..config.n_grid.len())
        .flat_map(|ni| (0..config.reps).map(move |rep| (ni, rep)))
        .collect();
    let rows: Vec<DiagnoseRow> = tasks
        .par_iter()
        .map(|&(ni, rep)| {
            diagnose_one(config, dataset, ni, rep).inspect_err(|e| {
                log::error!(
                    "diagnostics failed at n = {}, rep = {rep}, seed = {}: {e}",
                    config.n_grid[ni],
                    config.seed
                )
            })
        })
        .collect::<Result<_>>()?;
    let mut summary = vec![
        ("experiment".to_string(), "diagnose".to_string()),
        ("scheme".to_string(), config.scheme.to_string()),
        ("lambda_rule".to_string(), config.lambda_rule.to_string()),
        ("s_rule".to_string(), config.s_rule.to_string()),
        ("delta".to_string(), DIAGNOSE_DELTA.to_string()),
    ];
    if let Some(d) = dataset {
        summary.push(("dataset".into(), d.name.clone()));
    }
    Ok(DiagnoseResult { rows, summary })
}

fn diagnose_one(
    config: &ExperimentConfig,
    dataset: Option<&Dataset>,
    ni: usize,
    rep: usize,
) -> Result<DiagnoseRow> {
    let mut rng = rep_rng(config.seed, rep, ni as u64);
    let n_target = config.n_grid[ni];
    let data = match dataset {
        Some(d) => d.subsample(n_target, &mut rng),
        None => {
            let mut sim = SplineSimConfig {
                n: n_target,
                ..config.sim
            };
            if let KernelFamily::SplineEven { order, truncation } = config.kernel.family() {
                sim.r = order / 2;
                sim.truncation = truncation;
            }
            generate_spline_sim(&sim, &mut rng)?.0
        }
    };
    let spec = config.kernel_for(&data)?;
    let n = data.n();
    let lambda = config.lambda_rule.lambda(n);
    let k = spec.gram(&data.x)?;
    let gram = ExactGram::Dense(k.clone());
    let dof = effective_dof(&k, lambda)?;
    let s = config.s_rule.count(dof, lambda, spec.z0(), config.scheme)?;
    let set = sample_scheme(
        config,
        config.scheme,
        &spec,
        &data.x,
        &gram,
        lambda,
        s,
        &mut rng,
    )?;
    let k_tilde = approx_gram(&build_feature_matrix(&set, &spec, &data.x)?);
    let dof_approx = effective_dof(&k_tilde, lambda)?;
    let pool = sample_plain(&spec, s, &mut rng)?;
    let (_, profile) =
        algorithm1_from_pool(&spec, &data.x, &pool, lambda, &mut rng, config.algorithm1)?;
    let decay =
        DecayReport::from_eigenvalues(gram.eigenvalues().iter().map(|v| v / n as f64).collect());
    let dof_pos = dof.max(f64::MIN_POSITIVE);
    Ok(DiagnoseRow {
        n,
        lambda,
        s: set.len(),
        scheme: config.scheme,
        rep,
        dof,
        dof_approx,
        leverage_total: profile.total,
        whitened_error_norm: whitened_error_norm(&k, &k_tilde, lambda)?,
        required_plain: required_features(
            CountRule::PlainRff,
            dof_pos,
            lambda,
            spec.z0(),
            DIAGNOSE_DELTA,
        )?,
        required_leverage: required_features(
            CountRule::LeverageRff,
            dof_pos,
            lambda,
            spec.z0(),
            DIAGNOSE_DELTA,
        )?,
        fixed_point_bound: fixed_point_bound(&decay.eigenvalues, n, lambda, 1.0)?,
    })
}
