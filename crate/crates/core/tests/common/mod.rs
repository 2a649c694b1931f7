#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use levrff::Rng;

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(n: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn uniform_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Random PSD matrix `A A^T` of rank at most `rank`.
pub fn random_psd(n: usize, rank: usize, rng: &mut Rng) -> DMatrix<f64> {
    let a = normal_matrix(n, rank, rng);
    &a * a.transpose()
}

/// Sample mean and standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Trace of `K (K + c I)^{-1}` by an LU solve.
pub fn dof_by_solve(k: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = k.nrows();
    (k + DMatrix::identity(n, n) * (n as f64 * lambda))
        .lu()
        .solve(k)
        .unwrap()
        .trace()
}
