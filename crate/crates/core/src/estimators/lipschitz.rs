//! Hinge and logistic learners over feature matrices.
//!
//! Both minimise `F(beta) = (1/n) sum_i loss(y_i, z_i . beta) + lambda |beta|^2`
//! with deterministic full-batch methods:
//!
//! * hinge: cyclic dual coordinate descent (one full pass per iteration) on
//!   the equivalent problem `1/2 |beta|^2 + C sum_i hinge_i`, `C = 1/(2 lambda n)`;
//! * logistic: gradient descent with Barzilai-Borwein steps and Armijo
//!   backtracking.
//!
//! The recorded objective sequence is nonincreasing and the returned
//! coefficients are the best iterate seen. A fit stops once a subgradient of
//! norm at most `tol` is found or after `max_iter` iterations, in which case
//! the model is flagged as not converged.

use nalgebra::{DMatrix, DVector};

use super::{LinearModel, Loss};
use crate::features::{check_lambda, FeatureMatrix};
use crate::{Error, Result};

/// Margin band treated as "on the hinge" when forming a subgradient.
const HINGE_BAND: f64 = 1e-8;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

fn check_labels(y: &DVector<f64>) -> Result<()> {
    if let Some((i, v)) = y.iter().enumerate().find(|(_, &v)| v != 1.0 && v != -1.0) {
        return Err(Error::invalid(format!(
            "label {v} at row {i} is not -1 or +1"
        )));
    }
    Ok(())
}

/// Fit a hinge or logistic model.
pub fn fit_lipschitz(
    z: &FeatureMatrix,
    y: &DVector<f64>,
    loss: Loss,
    lambda: f64,
    options: SolverOptions,
) -> Result<LinearModel> {
    check_lambda(lambda)?;
    if z.n() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: z.n(),
            got: y.len(),
        });
    }
    check_labels(y)?;
    let (beta, converged, iterations, trace) = match loss {
        Loss::Hinge => solve_hinge(z.values(), y, lambda, options),
        Loss::Logistic => solve_logistic(z.values(), y, lambda, options),
        Loss::Squared => {
            return Err(Error::invalid("squared loss is fitted with fit_ridge"));
        }
    };
    if !converged {
        log::warn!("{loss} solver reached the iteration cap ({iterations}) before converging");
    }
    Ok(LinearModel {
        beta,
        lambda,
        loss,
        source: z.source().cloned(),
        converged,
        iterations,
        objective_trace: trace,
    })
}

/// Hinge objective and a subgradient at `beta`.
pub fn hinge_objective(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    lambda: f64,
) -> (f64, DVector<f64>) {
    let n = z.nrows() as f64;
    let margins = (z * beta).component_mul(y);
    let mut coef = DVector::zeros(y.len());
    let mut total = 0.0;
    for i in 0..y.len() {
        if margins[i] < 1.0 {
            total += 1.0 - margins[i];
            coef[i] = -y[i] / n;
        }
    }
    let grad = z.tr_mul(&coef) + beta * (2.0 * lambda);
    (total / n + lambda * beta.norm_squared(), grad)
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Logistic objective `(1/n) sum log(1 + exp(-y_i z_i . beta)) + lambda |beta|^2`
/// and its gradient.
pub fn logistic_objective(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    lambda: f64,
) -> (f64, DVector<f64>) {
    let n = z.nrows() as f64;
    let margins = (z * beta).component_mul(y);
    let value =
        margins.iter().map(|&m| softplus(-m)).sum::<f64>() / n + lambda * beta.norm_squared();
    let coef = DVector::from_fn(y.len(), |i, _| -y[i] * sigmoid(-margins[i]) / n);
    let grad = z.tr_mul(&coef) + beta * (2.0 * lambda);
    (value, grad)
}

type SolverOutput = (DVector<f64>, bool, usize, Vec<f64>);

fn solve_hinge(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    opts: SolverOptions,
) -> SolverOutput {
    let n = z.nrows();
    let d = z.ncols();
    let c = 1.0 / (2.0 * lambda * n as f64);
    let zt = z.transpose();
    let q: Vec<f64> = (0..n).map(|i| zt.column(i).norm_squared()).collect();
    let mut alpha = vec![0.0; n];
    let mut beta = DVector::zeros(d);
    let mut best = beta.clone();
    let mut best_value = hinge_objective(z, y, &beta, lambda).0;
    let mut trace = vec![best_value];
    for iter in 1..=opts.max_iter {
        for i in 0..n {
            let zi = zt.column(i);
            let new = if q[i] > 0.0 {
                let g = y[i] * zi.dot(&beta) - 1.0;
                (alpha[i] - g / q[i]).clamp(0.0, c)
            } else {
                c
            };
            let delta = new - alpha[i];
            if delta != 0.0 {
                beta.axpy(delta * y[i], &zi, 1.0);
                alpha[i] = new;
            }
        }
        let value = hinge_objective(z, y, &beta, lambda).0;
        if value <= best_value {
            best_value = value;
            best.copy_from(&beta);
        }
        trace.push(best_value);
        if hinge_subgradient_norm(z, y, &beta, &alpha, c) <= opts.tol {
            return (beta, true, iter, trace);
        }
    }
    (best, false, opts.max_iter, trace)
}

/// Norm of the subgradient `(1/n) sum_i (alpha_i / C - theta_i) y_i z_i` where
/// `theta_i` is 1 below the margin, 0 above it and `alpha_i / C` on it.
fn hinge_subgradient_norm(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    alpha: &[f64],
    c: f64,
) -> f64 {
    let n = z.nrows() as f64;
    let margins = (z * beta).component_mul(y);
    let coef = DVector::from_fn(y.len(), |i, _| {
        let ratio = alpha[i] / c;
        let theta = if margins[i] < 1.0 - HINGE_BAND {
            1.0
        } else if margins[i] > 1.0 + HINGE_BAND {
            0.0
        } else {
            ratio
        };
        (ratio - theta) * y[i] / n
    });
    z.tr_mul(&coef).norm()
}

fn solve_logistic(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    opts: SolverOptions,
) -> SolverOutput {
    let d = z.ncols();
    let row_max = (0..z.nrows())
        .map(|i| z.row(i).norm_squared())
        .fold(0.0_f64, f64::max);
    let mut step = 1.0 / (0.25 * row_max + 2.0 * lambda);
    let mut beta = DVector::zeros(d);
    let (mut value, mut grad) = logistic_objective(z, y, &beta, lambda);
    let mut trace = vec![value];
    for iter in 1..=opts.max_iter {
        if grad.norm() <= opts.tol {
            return (beta, true, iter - 1, trace);
        }
        let gg = grad.norm_squared();
        let mut accepted = None;
        let mut t = step;
        for _ in 0..MAX_BACKTRACK {
            let cand = &beta - &grad * t;
            let (v, g) = logistic_objective(z, y, &cand, lambda);
            if v <= value - ARMIJO_C * t * gg {
                accepted = Some((cand, v, g));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v, g)) = accepted else {
            // no decrease is representable at this precision
            return (beta, grad.norm() <= opts.tol, iter, trace);
        };
        let s = &cand - &beta;
        let dy = &g - &grad;
        let sy = s.dot(&dy);
        step = if sy > 0.0 { s.norm_squared() / sy } else { t };
        beta = cand;
        value = v;
        grad = g;
        trace.push(value);
    }
    let converged = grad.norm() <= opts.tol;
    (beta, converged, opts.max_iter, trace)
}
