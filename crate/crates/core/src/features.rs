//! Feature matrices, effective degrees of freedom and leverage-weighted
//! frequency sampling.
//!
//! Scaling convention: a [`FeatureMatrix`] column for frequency `v_i` holds
//! `w_i * z(v_i, x_j) / sqrt(s)`, so `Z Z^T` is the kernel approximation
//! `K~` with the Monte-Carlo average already folded in.

use std::fmt;
use std::str::FromStr;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::diagnostics::{required_features, CountRule};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::linalg::{add_diagonal, clip_nonnegative, gram_columns, spd_solve, sym_eigenvalues};
use crate::{Error, Result, Rng};

/// How a feature set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Plain,
    ExactLeverage,
    ApproxLeverage,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Plain => "plain",
            Scheme::ExactLeverage => "exact_leverage",
            Scheme::ApproxLeverage => "approx_leverage",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "plain" => Ok(Scheme::Plain),
            "exact_leverage" | "exact" | "leverage" => Ok(Scheme::ExactLeverage),
            "approx_leverage" | "approx" | "algorithm1" => Ok(Scheme::ApproxLeverage),
            other => Err(Error::invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Sampled frequencies (one per row) with their importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFeatureSet {
    pub frequencies: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub scheme: Scheme,
    pub source_seed: u64,
}

impl WeightedFeatureSet {
    pub fn new(
        frequencies: DMatrix<f64>,
        weights: Vec<f64>,
        scheme: Scheme,
        source_seed: u64,
    ) -> Result<Self> {
        if frequencies.nrows() == 0 {
            return Err(Error::invalid(
                "feature set must contain at least one frequency",
            ));
        }
        if weights.len() != frequencies.nrows() {
            return Err(Error::DimensionMismatch {
                expected: frequencies.nrows(),
                got: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!(
                "feature weight {w} is not positive and finite"
            )));
        }
        Ok(Self {
            frequencies,
            weights,
            scheme,
            source_seed,
        })
    }

    /// Number of frequencies `s`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Subset of frequencies, in the given order and with unit weights.
    fn select(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), self.frequencies.ncols(), |i, j| {
            self.frequencies[(idx[i], j)]
        })
    }
}

fn seed_fingerprint(rng: &Rng) -> u64 {
    let seed = rng.get_seed();
    u64::from_le_bytes(seed[..8].try_into().expect("seed has 32 bytes")) ^ rng.get_stream()
}

/// Draw `s` frequencies from the spectral measure with unit weights.
pub fn sample_plain(spec: &KernelSpec, s: usize, rng: &mut Rng) -> Result<WeightedFeatureSet> {
    if s == 0 {
        return Err(Error::invalid("feature count must be at least 1"));
    }
    let seed = seed_fingerprint(rng);
    let freqs = spec.spectral_sample(rng, s);
    WeightedFeatureSet::new(freqs, vec![1.0; s], Scheme::Plain, seed)
}

/// Scaled design matrix. Each column already includes the importance weight
/// and the `1/sqrt(s)` factor.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    width: usize,
    source: Option<(KernelSpec, WeightedFeatureSet)>,
}

impl FeatureMatrix {
    /// Wrap an arbitrary design matrix (no frequency source attached).
    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        Self {
            values,
            width: 1,
            source: None,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Number of rows (data points).
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of columns `D`.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Columns per frequency (1 or 2).
    pub fn width(&self) -> usize {
        self.width
    }

    /// Kernel and feature set the matrix was built from, if any.
    pub fn source(&self) -> Option<&(KernelSpec, WeightedFeatureSet)> {
        self.source.as_ref()
    }
}

/// Entry `(j, i)` is `w_i z(v_i, x_j) / sqrt(s)`.
pub fn build_feature_matrix(
    set: &WeightedFeatureSet,
    spec: &KernelSpec,
    x: &DMatrix<f64>,
) -> Result<FeatureMatrix> {
    if x.nrows() == 0 {
        return Err(Error::invalid(
            "cannot build features for an empty input set",
        ));
    }
    let mut values = spec.features(&set.frequencies, x)?;
    let width = spec.feature_width();
    let inv_sqrt_s = 1.0 / (set.len() as f64).sqrt();
    for (i, &w) in set.weights.iter().enumerate() {
        for c in 0..width {
            values.column_mut(width * i + c).scale_mut(w * inv_sqrt_s);
        }
    }
    Ok(FeatureMatrix {
        values,
        width,
        source: Some((*spec, set.clone())),
    })
}

/// `K~ = Z Z^T`.
pub fn approx_gram(z: &FeatureMatrix) -> DMatrix<f64> {
    gram_columns(&z.values.transpose())
}

/// Eigenvalue tolerance used when deciding whether a Gram matrix is PSD.
fn psd_tolerance(n: usize, scale: f64) -> f64 {
    1e-8 * n as f64 * scale.max(1.0)
}

/// `d_K^lambda = Tr[K (K + n lambda I)^{-1}] = sum_i mu_i / (mu_i + n lambda)`.
pub fn effective_dof(k: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let n = k.nrows();
    let eig = sym_eigenvalues(k);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(0.0_f64, f64::max);
    if min < -psd_tolerance(n, max) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(dof_from_eigenvalues(
        &clip_nonnegative(&eig, "effective dof"),
        n,
        lambda,
    ))
}

/// Effective degrees of freedom from (nonnegative) eigenvalues of `K`.
pub fn dof_from_eigenvalues(eigs: &DVector<f64>, n: usize, lambda: f64) -> f64 {
    let c = n as f64 * lambda;
    eigs.iter().map(|&mu| mu / (mu + c)).sum()
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

/// Exact Gram matrix, stored densely or as a thin factor `K = B B^T`.
#[derive(Debug, Clone)]
pub enum ExactGram {
    Dense(DMatrix<f64>),
    Factored(DMatrix<f64>),
}

impl ExactGram {
    /// Uses the spline kernel's finite factorisation when it is thinner than
    /// `n`, the dense Gram matrix otherwise.
    pub fn for_kernel(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<Self> {
        if let KernelFamily::SplineEven { truncation, .. } = spec.family() {
            if 2 * truncation + 1 < x.nrows() {
                let b = spec.spline_basis(x)?.expect("spline basis");
                return Ok(ExactGram::Factored(b));
            }
        }
        Ok(ExactGram::Dense(spec.gram(x)?))
    }

    pub fn n(&self) -> usize {
        match self {
            ExactGram::Dense(k) => k.nrows(),
            ExactGram::Factored(b) => b.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            ExactGram::Dense(k) => k.clone(),
            ExactGram::Factored(b) => b * b.transpose(),
        }
    }

    /// Nonzero part of the spectrum of `K`, clipped at zero, nonincreasing.
    pub fn eigenvalues(&self) -> DVector<f64> {
        let raw = match self {
            ExactGram::Dense(k) => sym_eigenvalues(k),
            ExactGram::Factored(b) => sym_eigenvalues(&gram_columns(b)),
        };
        clip_nonnegative(&raw, "exact gram")
    }

    pub fn dof(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        Ok(dof_from_eigenvalues(&self.eigenvalues(), self.n(), lambda))
    }

    /// Regulariser at which `d_K^lambda` equals `target` (log-scale bisection).
    pub fn lambda_for_dof(&self, target: f64) -> f64 {
        let eigs = self.eigenvalues();
        let n = self.n();
        let (mut lo, mut hi) = (-16.0_f64, 6.0_f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if dof_from_eigenvalues(&eigs, n, 10f64.powf(mid)) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        10f64.powf(hi)
    }

    /// Quadratic forms `z_c^T (K + n lambda I)^{-1} z_c` for every column `z_c`
    /// of `cols`.
    pub fn quadratic_forms(&self, cols: &DMatrix<f64>, lambda: f64) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        let n = self.n();
        if cols.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cols.nrows(),
            });
        }
        let c = n as f64 * lambda;
        match self {
            ExactGram::Dense(k) => {
                let solved = spd_solve(&add_diagonal(k, c), cols)?;
                Ok((0..cols.ncols())
                    .map(|i| cols.column(i).dot(&solved.column(i)))
                    .collect())
            }
            ExactGram::Factored(b) => {
                // (B B^T + c I)^{-1} = (I - B (B^T B + c I)^{-1} B^T) / c
                let btz = b.tr_mul(cols);
                let inner = spd_solve(&add_diagonal(&gram_columns(b), c), &btz)?;
                Ok((0..cols.ncols())
                    .map(|i| {
                        let zz = cols.column(i).norm_squared();
                        (zz - btz.column(i).dot(&inner.column(i))) / c
                    })
                    .collect())
            }
        }
    }
}

/// Per-feature leverage scores with their total.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageProfile {
    pub scores: Vec<f64>,
    pub total: f64,
    pub dof: f64,
    pub lambda: f64,
}

fn combine_width(cols: Vec<f64>, width: usize) -> Vec<f64> {
    if width == 1 {
        return cols;
    }
    cols.chunks(width).map(|c| c.iter().sum()).collect()
}

/// Exact ridge leverage scores `z_v^T (K + n lambda I)^{-1} z_v` of a pool of
/// spectral-measure frequencies.
pub fn exact_leverage_scores(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    pool: &WeightedFeatureSet,
    lambda: f64,
) -> Result<LeverageProfile> {
    let gram = ExactGram::for_kernel(spec, x)?;
    exact_leverage_scores_with_gram(&gram, spec, x, pool, lambda)
}

/// [`exact_leverage_scores`] with a precomputed exact Gram.
pub fn exact_leverage_scores_with_gram(
    gram: &ExactGram,
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    pool: &WeightedFeatureSet,
    lambda: f64,
) -> Result<LeverageProfile> {
    check_lambda(lambda)?;
    let z = spec.features(&pool.frequencies, x)?;
    let scores = combine_width(gram.quadratic_forms(&z, lambda)?, spec.feature_width());
    let total = scores.iter().sum();
    Ok(LeverageProfile {
        scores,
        total,
        dof: gram.dof(lambda)?,
        lambda,
    })
}

/// How features are selected from a scored pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    /// Multinomial draws with replacement, probability proportional to score.
    #[default]
    Multinomial,
    /// Largest scores first; ties broken by pool index.
    TopL,
}

/// Select `count` pool members by score and attach the importance weights
/// `sqrt((1/P) / q_i)`, `q_i = score_i / sum(score)`.
fn resample(
    pool: &WeightedFeatureSet,
    scores: &[f64],
    count: usize,
    selection: Selection,
    scheme: Scheme,
    rng: &mut Rng,
) -> Result<WeightedFeatureSet> {
    let total: f64 = scores.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateScores(format!(
            "leverage scores sum to {total}; lambda is too large for the numeric range"
        )));
    }
    let seed = seed_fingerprint(rng);
    let p = scores.len() as f64;
    let idx: Vec<usize> = match selection {
        Selection::Multinomial => {
            let dist =
                WeightedIndex::new(scores).map_err(|e| Error::DegenerateScores(e.to_string()))?;
            (0..count).map(|_| dist.sample(rng)).collect()
        }
        Selection::TopL => {
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            order.truncate(count);
            order
        }
    };
    let weights = idx
        .iter()
        .map(|&i| ((1.0 / p) / (scores[i] / total)).sqrt())
        .collect();
    WeightedFeatureSet::new(pool.select(&idx), weights, scheme, seed)
}

/// Draw a spectral pool of `pool_size` frequencies, score it against the exact
/// Gram matrix and resample `s` features proportionally to the scores.
pub fn sample_exact_leverage(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    lambda: f64,
    s: usize,
    pool_size: usize,
    rng: &mut Rng,
) -> Result<WeightedFeatureSet> {
    let gram = ExactGram::for_kernel(spec, x)?;
    sample_exact_leverage_with_gram(&gram, spec, x, lambda, s, pool_size, rng)
}

/// [`sample_exact_leverage`] with a precomputed exact Gram.
pub fn sample_exact_leverage_with_gram(
    gram: &ExactGram,
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    lambda: f64,
    s: usize,
    pool_size: usize,
    rng: &mut Rng,
) -> Result<WeightedFeatureSet> {
    check_lambda(lambda)?;
    if s == 0 {
        return Err(Error::invalid("feature count must be at least 1"));
    }
    if pool_size < s {
        return Err(Error::invalid(format!(
            "pool size {pool_size} is smaller than the feature count {s}"
        )));
    }
    let pool = sample_plain(spec, pool_size, rng)?;
    let profile = exact_leverage_scores_with_gram(gram, spec, x, &pool, lambda)?;
    resample(
        &pool,
        &profile.scores,
        s,
        Selection::Multinomial,
        Scheme::ExactLeverage,
        rng,
    )
}

/// How many features the approximate-leverage sampler keeps after scoring its pool.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LRule {
    /// `round(sum p_i)` with the unscaled scores, clamped to `[1, s]`.
    #[default]
    Total,
    /// `round(sum p_i / s)`, i.e. the rounded approximate effective dof.
    Dof,
    /// Leverage feature-count rule `ceil(5 d log(16 d / delta))` at the
    /// approximate effective dof `d`.
    Corollary { delta: f64 },
    /// A fixed count.
    Fixed(usize),
}

/// Options for [`algorithm1_approx_leverage`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Algorithm1Options {
    pub selection: Selection,
    pub l_rule: LRule,
}

/// Scores `p_i = [Z^T Z ((1/s) Z^T Z + n lambda I)^{-1}]_{ii}` of an unscaled
/// feature block; pair columns are summed per frequency.
pub fn algorithm1_scores(z_unscaled: &DMatrix<f64>, width: usize, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if width == 0 || !z_unscaled.ncols().is_multiple_of(width) {
        return Err(Error::invalid(
            "feature width does not divide the column count",
        ));
    }
    let n = z_unscaled.nrows() as f64;
    let s = (z_unscaled.ncols() / width) as f64;
    let g = gram_columns(z_unscaled);
    // G and (G/s + cI)^{-1} commute, so the diagonal of their product equals
    // the diagonal of the symmetric solve (G/s + cI)^{-1} G.
    let shifted = add_diagonal(&(&g / s), n * lambda);
    let solved = spd_solve(&shifted, &g)?;
    let diag: Vec<f64> = (0..g.ncols()).map(|i| solved[(i, i)].max(0.0)).collect();
    Ok(combine_width(diag, width))
}

fn choose_l(rule: LRule, total: f64, s: usize) -> Result<usize> {
    let raw = match rule {
        LRule::Total => total.round(),
        LRule::Dof => (total / s as f64).round(),
        LRule::Corollary { delta } => {
            let d = total / s as f64;
            if d <= 0.0 {
                1.0
            } else {
                required_features(CountRule::LeverageRff, d, 1.0, 1.0, delta)? as f64
            }
        }
        LRule::Fixed(l) => l as f64,
    };
    Ok((raw.max(1.0) as usize).min(s))
}

/// Approximate leverage-weighted sampling: score `s` spectral features with
/// their own approximate Gram matrix and keep `l` of them.
pub fn algorithm1_approx_leverage(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    lambda: f64,
    s: usize,
    rng: &mut Rng,
    options: Algorithm1Options,
) -> Result<(WeightedFeatureSet, LeverageProfile)> {
    check_lambda(lambda)?;
    let pool = sample_plain(spec, s, rng)?;
    algorithm1_from_pool(spec, x, &pool, lambda, rng, options)
}

/// Approximate-leverage sampling starting from an already drawn spectral pool.
pub fn algorithm1_from_pool(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    pool: &WeightedFeatureSet,
    lambda: f64,
    rng: &mut Rng,
    options: Algorithm1Options,
) -> Result<(WeightedFeatureSet, LeverageProfile)> {
    check_lambda(lambda)?;
    let s = pool.len();
    let z = spec.features(&pool.frequencies, x)?;
    let scores = algorithm1_scores(&z, spec.feature_width(), lambda)?;
    let total: f64 = scores.iter().sum();
    let l = choose_l(options.l_rule, total, s)?;
    debug!("approximate leverage: s = {s}, sum p = {total:.4}, l = {l}");
    let profile = LeverageProfile {
        scores,
        total,
        dof: total / s as f64,
        lambda,
    };
    let set = resample(
        pool,
        &profile.scores,
        l,
        options.selection,
        Scheme::ApproxLeverage,
        rng,
    )?;
    Ok((set, profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::FeatureStyle;
    use crate::seeded_rng;

    fn grid(n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |i, j| {
            ((i * 7 + j * 3) as f64 * 0.0917).fract() * 2.0 - 1.0
        })
    }

    #[test]
    fn single_feature_at_zero_argument() {
        let spec = KernelSpec::gaussian(1.0, 1).unwrap();
        let set = WeightedFeatureSet::new(
            DMatrix::from_element(1, 1, 0.7),
            vec![1.0],
            Scheme::Plain,
            0,
        )
        .unwrap();
        let x = DMatrix::zeros(4, 1);
        let z = build_feature_matrix(&set, &spec, &x).unwrap();
        assert_eq!(z.values(), &DMatrix::from_element(4, 1, 1.0));
    }

    #[test]
    fn doubled_weights_quadruple_gram() {
        let spec = KernelSpec::gaussian(1.0, 2).unwrap();
        let mut rng = seeded_rng(1);
        let set = sample_plain(&spec, 8, &mut rng).unwrap();
        let mut doubled = set.clone();
        doubled.weights.iter_mut().for_each(|w| *w *= 2.0);
        let x = grid(6, 2);
        let k1 = approx_gram(&build_feature_matrix(&set, &spec, &x).unwrap());
        let k2 = approx_gram(&build_feature_matrix(&doubled, &spec, &x).unwrap());
        assert!((k2 - k1 * 4.0).amax() < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_zero_gram() {
        let z = FeatureMatrix::from_matrix(DMatrix::zeros(5, 3));
        assert_eq!(approx_gram(&z), DMatrix::zeros(5, 5));
    }

    #[test]
    fn invalid_feature_sets_rejected() {
        let f = DMatrix::zeros(2, 1);
        assert!(WeightedFeatureSet::new(f.clone(), vec![1.0], Scheme::Plain, 0).is_err());
        assert!(WeightedFeatureSet::new(f.clone(), vec![1.0, 0.0], Scheme::Plain, 0).is_err());
        assert!(WeightedFeatureSet::new(f, vec![1.0, f64::NAN], Scheme::Plain, 0).is_err());
    }

    #[test]
    fn dof_scalar_identity_case() {
        let n = 7;
        let c = 2.5;
        let lambda = 0.1;
        let k = DMatrix::identity(n, n) * c;
        let expected = n as f64 * c / (c + n as f64 * lambda);
        assert!((effective_dof(&k, lambda).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dof_rejects_indefinite_and_bad_lambda() {
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(effective_dof(&k, 0.1), Err(Error::NotPsd { .. })));
        assert!(effective_dof(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn factored_and_dense_gram_agree() {
        let spec = KernelSpec::spline(2, 6).unwrap();
        let x = grid(30, 1).map(|v| v.abs());
        let fact = ExactGram::for_kernel(&spec, &x).unwrap();
        assert!(matches!(fact, ExactGram::Factored(_)));
        let dense = ExactGram::Dense(spec.gram(&x).unwrap());
        assert!((fact.dof(0.01).unwrap() - dense.dof(0.01).unwrap()).abs() < 1e-10);
        let mut rng = seeded_rng(2);
        let pool = sample_plain(&spec, 9, &mut rng).unwrap();
        let z = spec.features(&pool.frequencies, &x).unwrap();
        let a = fact.quadratic_forms(&z, 0.01).unwrap();
        let b = dense.quadratic_forms(&z, 0.01).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-8 * q.abs().max(1.0));
        }
    }

    #[test]
    fn lambda_for_dof_inverts_dof() {
        let spec = KernelSpec::gaussian(4.0, 1).unwrap();
        let gram = ExactGram::for_kernel(&spec, &grid(40, 1)).unwrap();
        let lam = gram.lambda_for_dof(5.0);
        assert!((gram.dof(lam).unwrap() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn equal_scores_give_unit_weights() {
        let spec = KernelSpec::spline(2, 4).unwrap();
        let mut rng = seeded_rng(5);
        let pool = sample_plain(&spec, 10, &mut rng).unwrap();
        let set = resample(
            &pool,
            &[0.3; 10],
            6,
            Selection::Multinomial,
            Scheme::ExactLeverage,
            &mut rng,
        )
        .unwrap();
        assert!(set.weights.iter().all(|&w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_scores_are_degenerate() {
        let spec = KernelSpec::spline(2, 4).unwrap();
        let mut rng = seeded_rng(5);
        let pool = sample_plain(&spec, 4, &mut rng).unwrap();
        let err = resample(
            &pool,
            &[0.0; 4],
            2,
            Selection::Multinomial,
            Scheme::ExactLeverage,
            &mut rng,
        );
        assert!(matches!(err, Err(Error::DegenerateScores(_))));
    }

    #[test]
    fn top_l_breaks_ties_by_index() {
        let spec = KernelSpec::spline(2, 4).unwrap();
        let mut rng = seeded_rng(5);
        let pool = sample_plain(&spec, 5, &mut rng).unwrap();
        let set = resample(
            &pool,
            &[1.0, 3.0, 2.0, 3.0, 0.5],
            3,
            Selection::TopL,
            Scheme::ApproxLeverage,
            &mut rng,
        )
        .unwrap();
        assert_eq!(set.frequencies[(0, 0)], pool.frequencies[(1, 0)]);
        assert_eq!(set.frequencies[(1, 0)], pool.frequencies[(3, 0)]);
        assert_eq!(set.frequencies[(2, 0)], pool.frequencies[(2, 0)]);
    }

    #[test]
    fn pool_smaller_than_s_rejected() {
        let spec = KernelSpec::spline(2, 4).unwrap();
        let x = grid(5, 1);
        let mut rng = seeded_rng(0);
        assert!(sample_exact_leverage(&spec, &x, 0.1, 10, 5, &mut rng).is_err());
    }

    #[test]
    fn l_rules() {
        assert_eq!(choose_l(LRule::Total, 57.4, 40).unwrap(), 40);
        assert_eq!(choose_l(LRule::Total, 0.2, 40).unwrap(), 1);
        assert_eq!(choose_l(LRule::Dof, 57.4 * 4.0, 40).unwrap(), 6);
        assert_eq!(choose_l(LRule::Fixed(12), 1.0, 40).unwrap(), 12);
        let d: f64 = 2.0;
        let want = (5.0 * d * (16.0 * d / 0.1).ln()).ceil() as usize;
        assert_eq!(
            choose_l(LRule::Corollary { delta: 0.1 }, d * 500.0, 500).unwrap(),
            want
        );
    }

    #[test]
    fn pair_style_scores_sum_columns() {
        let spec = KernelSpec::gaussian(1.0, 2)
            .unwrap()
            .with_style(FeatureStyle::CosSinPair);
        let mut rng = seeded_rng(8);
        let pool = sample_plain(&spec, 6, &mut rng).unwrap();
        let x = grid(12, 2);
        let z = spec.features(&pool.frequencies, &x).unwrap();
        let per_col = algorithm1_scores(&z, 1, 0.05).unwrap();
        let per_freq = algorithm1_scores(&z, 2, 0.05).unwrap();
        // scalar interpretation uses s = 12 instead of 6, so compare through
        // the pair computation directly
        assert_eq!(per_freq.len(), 6);
        assert_eq!(per_col.len(), 12);
        let total: f64 = per_freq.iter().sum();
        let g = z.tr_mul(&z);
        let shifted = add_diagonal(&(&g / 6.0), 12.0 * 0.05);
        let m = spd_solve(&shifted, &g).unwrap();
        assert!((total - m.trace()).abs() < 1e-9 * total.max(1.0));
    }
}
