//! Quantities from the generalisation analysis that can be computed on data:
//! the whitened kernel-approximation error, feature-count rules, the
//! local-complexity fixed-point bound and eigenvalue decay summaries.

use nalgebra::DMatrix;

use crate::features::check_lambda;
use crate::linalg::{clip_nonnegative, shifted_inv_sqrt, sym_eigenvalues, sym_spectral_norm};
use crate::{Error, Result};

/// Eigenvalues below this are ignored by the decay fit.
const DECAY_FLOOR: f64 = 1e-12;
/// Minimum coefficient of determination for a decay model to be reported.
const DECAY_MIN_R2: f64 = 0.9;

/// Operator norm of `(K + n lambda I)^{-1/2} (K~ - K) (K + n lambda I)^{-1/2}`.
pub fn whitened_error_norm(k: &DMatrix<f64>, k_tilde: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            got: k.ncols(),
        });
    }
    if k.shape() != k_tilde.shape() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            got: k_tilde.nrows(),
        });
    }
    let n = k.nrows() as f64;
    let w = shifted_inv_sqrt(k, n * lambda);
    let m = &w * (k_tilde - k) * &w;
    Ok(sym_spectral_norm(&m))
}

/// Which sampling distribution a feature count is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountRule {
    /// Frequencies from the spectral measure.
    PlainRff,
    /// Frequencies from the empirical ridge leverage distribution.
    LeverageRff,
}

/// Number of features sufficient for the approximation guarantee:
/// `ceil(5 d log(16 d / delta))` for leverage sampling and
/// `ceil(5 (z0^2 / lambda) log(16 d / delta))` for plain sampling, natural
/// logarithm, never less than 1.
pub fn required_features(
    rule: CountRule,
    dof: f64,
    lambda: f64,
    z0: f64,
    delta: f64,
) -> Result<usize> {
    if !(dof > 0.0 && dof.is_finite()) {
        return Err(Error::invalid(format!("dof must be positive, got {dof}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let log_term = (16.0 * dof / delta).ln();
    let lead = match rule {
        CountRule::LeverageRff => dof,
        CountRule::PlainRff => {
            check_lambda(lambda)?;
            z0 * z0 / lambda
        }
    };
    let count = (5.0 * lead * log_term).ceil();
    if !count.is_finite() || count > 1e15 {
        return Err(Error::Numerical(format!(
            "feature count {count} is not representable"
        )));
    }
    Ok(count.max(1.0) as usize)
}

/// Constants of the excess-risk analysis that have no published numeric
/// value. All default to 1 and only rescale the reported bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConstants {
    pub e: [f64; 7],
    pub b: f64,
    pub d: f64,
    pub l: f64,
    pub sigma_y2: f64,
}

impl Default for AnalysisConstants {
    fn default() -> Self {
        Self {
            e: [1.0; 7],
            b: 1.0,
            d: 1.0,
            l: 1.0,
            sigma_y2: 1.0,
        }
    }
}

impl AnalysisConstants {
    pub fn e7(&self) -> f64 {
        self.e[6]
    }
}

/// `min_{0 <= h <= n} (h/n) e7 / (n^2 lambda^2) + sqrt((1/n) sum_{i > h} eig_i)`
/// over eigenvalues of the normalised Gram matrix, sorted nonincreasing.
pub fn fixed_point_bound(eigs: &[f64], n: usize, lambda: f64, e7: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if eigs.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("eigenvalues must be sorted nonincreasing"));
    }
    let nf = n as f64;
    let slope = e7 / (nf * nf * lambda * lambda);
    let mut tail = vec![0.0; eigs.len() + 1];
    for i in (0..eigs.len()).rev() {
        tail[i] = tail[i + 1] + eigs[i].max(0.0);
    }
    let best = (0..=n)
        .map(|h| (h as f64 / nf) * slope + (tail[h.min(eigs.len())] / nf).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    Exponential,
    Polynomial,
    Undetermined,
}

impl DecayModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecayModel::Exponential => "exponential",
            DecayModel::Polynomial => "polynomial",
            DecayModel::Undetermined => "undetermined",
        }
    }
}

/// Least-squares summary of how fast the normalised Gram spectrum decays.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// Eigenvalues of `K / n`, clipped at zero, nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub fitted_model: DecayModel,
    /// `ln r` for `eig_i ~ r^i`, or `p` for `eig_i ~ i^p`.
    pub fit_exponent: f64,
    pub fit_r2: f64,
}

impl DecayReport {
    /// Fit both decay models to a spectrum; the index `i` starts at 1.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.iter_mut().for_each(|v| *v = v.max(0.0));
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let kept: Vec<(f64, f64)> = eigenvalues
            .iter()
            .enumerate()
            .take_while(|(_, &v)| v > DECAY_FLOOR)
            .map(|(i, &v)| ((i + 1) as f64, v.ln()))
            .collect();
        if kept.len() < 3 {
            return Self {
                eigenvalues,
                fitted_model: DecayModel::Undetermined,
                fit_exponent: f64::NAN,
                fit_r2: f64::NAN,
            };
        }
        let ys: Vec<f64> = kept.iter().map(|p| p.1).collect();
        let lin: Vec<f64> = kept.iter().map(|p| p.0).collect();
        let logs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
        let (exp_slope, exp_r2) = least_squares(&lin, &ys);
        let (poly_slope, poly_r2) = least_squares(&logs, &ys);
        let (model, slope, r2) = if exp_r2 >= poly_r2 {
            (DecayModel::Exponential, exp_slope, exp_r2)
        } else {
            (DecayModel::Polynomial, poly_slope, poly_r2)
        };
        Self {
            eigenvalues,
            fitted_model: if r2 < DECAY_MIN_R2 {
                DecayModel::Undetermined
            } else {
                model
            },
            fit_exponent: slope,
            fit_r2: r2,
        }
    }
}

/// Decay report for the spectrum of `K / n`.
pub fn decay_report(k: &DMatrix<f64>, n: usize) -> Result<DecayReport> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let eig = clip_nonnegative(&sym_eigenvalues(&(k / n as f64)), "decay report");
    Ok(DecayReport::from_eigenvalues(eig.iter().copied().collect()))
}

/// Slope and coefficient of determination of an ordinary least-squares line.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, r2)
}
