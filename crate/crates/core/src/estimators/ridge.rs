use nalgebra::{DMatrix, DVector};

use super::{KrrModel, LinearModel, Loss};
use crate::features::{check_lambda, FeatureMatrix};
use crate::kernels::KernelSpec;
use crate::linalg::{add_diagonal, gram_columns, spd_solve_vec, sym_eigen};
use crate::{Error, Result};

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Ridge regression in feature space, `beta = (Z^T Z + n lambda I)^{-1} Z^T y`.
///
/// When there are more columns than rows the equivalent dual form
/// `Z^T (Z Z^T + n lambda I)^{-1} y` is solved instead.
pub fn fit_ridge(z: &FeatureMatrix, y: &DVector<f64>, lambda: f64) -> Result<LinearModel> {
    check_lambda(lambda)?;
    check_len(z.n(), y.len())?;
    let values = z.values();
    let c = z.n() as f64 * lambda;
    let beta = if z.dim() <= z.n() {
        let a = add_diagonal(&gram_columns(values), c);
        spd_solve_vec(&a, &values.tr_mul(y))?
    } else {
        let a = add_diagonal(&(values * values.transpose()), c);
        values.tr_mul(&spd_solve_vec(&a, y)?)
    };
    Ok(LinearModel {
        beta,
        lambda,
        loss: Loss::Squared,
        source: z.source().cloned(),
        converged: true,
        iterations: 0,
        objective_trace: Vec::new(),
    })
}

/// Solve `(K + n lambda I) alpha = y`.
pub fn fit_krr_exact(k: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<KrrModel> {
    check_lambda(lambda)?;
    check_len(k.nrows(), y.len())?;
    let c = k.nrows() as f64 * lambda;
    let alpha = spd_solve_vec(&add_diagonal(k, c), y)?;
    Ok(KrrModel {
        alpha,
        lambda,
        training: None,
    })
}

/// Exact kernel ridge regression that remembers its training inputs.
pub fn fit_krr(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<KrrModel> {
    let mut model = fit_krr_exact(&spec.gram(x)?, y, lambda)?;
    model.training = Some((*spec, x.clone()));
    Ok(model)
}

/// Best approximation of a target vector in feature space.
///
/// Returns `(lambda f^T (K~ + n lambda I)^{-1} f, |beta|^2)` where `beta`
/// minimises `(1/n)|f - Z beta|^2 + lambda |beta|^2`. The first value is that
/// minimum; with the column scaling the second equals `s |beta_q|^2` in the
/// unscaled parameterisation.
pub fn function_approx_error(
    f: &DVector<f64>,
    z: &FeatureMatrix,
    lambda: f64,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    check_len(z.n(), f.len())?;
    if f.iter().all(|&v| v == 0.0) {
        return Ok((0.0, 0.0));
    }
    let model = fit_ridge(z, f, lambda)?;
    // (K~ + cI)^{-1} f = (f - Z beta) / c
    let residual = f - z.values() * &model.beta;
    let error = f.dot(&residual) / z.n() as f64;
    Ok((error, model.beta.norm_squared()))
}

/// `<y - f_hat, f_beta - f_hat>` with the kernel ridge fit
/// `f_hat = K (K + n lambda I)^{-1} y` and the feature ridge fit
/// `f_beta = K~ (K~ + n lambda I)^{-1} y`.
///
/// This vanishes when the feature span reproduces `K` exactly (`K~ = K`) and
/// for `y = 0`; for other feature spans inside the column space of `K` it is
/// generally nonzero, see [`orthogonality_check_projection`].
pub fn orthogonality_check(
    k: &DMatrix<f64>,
    z: &FeatureMatrix,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_len(k.nrows(), y.len())?;
    check_len(k.nrows(), z.n())?;
    let f_hat = k * fit_krr_exact(k, y, lambda)?.alpha;
    let f_beta = z.values() * fit_ridge(z, y, lambda)?.beta;
    Ok((y - &f_hat).dot(&(f_beta - f_hat)))
}

/// `<y - P y, f_beta - P y>` with `P` the orthogonal projector onto the column
/// space of `K`. Zero whenever the feature span lies in that column space.
pub fn orthogonality_check_projection(
    k: &DMatrix<f64>,
    z: &FeatureMatrix,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_len(k.nrows(), y.len())?;
    check_len(k.nrows(), z.n())?;
    let eig = sym_eigen(k);
    let top = eig.values.iter().copied().fold(0.0_f64, f64::max);
    let mut py = DVector::zeros(y.len());
    for (i, &mu) in eig.values.iter().enumerate() {
        if mu > 1e-10 * top {
            let u = eig.vectors.column(i);
            py += u * u.dot(y);
        }
    }
    let f_beta = z.values() * fit_ridge(z, y, lambda)?.beta;
    Ok((y - &py).dot(&(f_beta - py)))
}
