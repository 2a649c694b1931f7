//! Dense symmetric linear algebra helpers shared by the learners and
//! diagnostics.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::{Error, Result};

/// Rows per block when accumulating `Z^T Z`.
const GRAM_BLOCK_ROWS: usize = 256;

/// Returns `a + c * I`.
pub fn add_diagonal(a: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    let mut out = a.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] += c;
    }
    out
}

/// Solve `a x = b` for symmetric positive-definite `a`.
///
/// Falls back to a single retry with `1e-10 * trace(a) / n` added to the
/// diagonal when the Cholesky factorisation fails; the retry is logged.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let n = a.nrows().max(1) as f64;
    let jitter = 1e-10 * a.trace().abs() / n;
    warn!(
        "cholesky failed on {}x{} system, retrying with jitter {jitter:e}",
        a.nrows(),
        a.ncols()
    );
    match add_diagonal(a, jitter).cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Err(Error::Numerical(format!(
            "matrix of order {} is not positive definite even after jitter",
            a.nrows()
        ))),
    }
}

/// Vector right-hand-side version of [`spd_solve`].
pub fn spd_solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = spd_solve(a, &rhs)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

/// Symmetric eigendecomposition with eigenvalues sorted in nonincreasing order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Eigendecompose the symmetric part of `a`.
pub fn sym_eigen(a: &DMatrix<f64>) -> SymEigen {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(a.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEigen { values, vectors }
}

/// Eigenvalues of the symmetric part of `a`, nonincreasing.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    DVector::from_vec(v)
}

/// Clip negative eigenvalues to zero, logging when any clipping happens.
pub fn clip_nonnegative(values: &DVector<f64>, context: &str) -> DVector<f64> {
    let negatives = values.iter().filter(|&&v| v < 0.0).count();
    if negatives > 0 {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        debug!("{context}: clipped {negatives} negative eigenvalues (min {min:e})");
    }
    values.map(|v| v.max(0.0))
}

/// `(a + c I)^{-1/2}` for symmetric PSD `a` and `c > 0`, eigenvalues of `a`
/// clipped at zero first.
pub fn shifted_inv_sqrt(a: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    let eig = sym_eigen(a);
    let vals = clip_nonnegative(&eig.values, "inverse square root");
    let scale = vals.map(|v| 1.0 / (v + c).sqrt());
    let mut scaled = eig.vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= scale[j];
    }
    &scaled * eig.vectors.transpose()
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn sym_spectral_norm(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a)
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `Z^T Z`, accumulated over fixed row blocks and summed in block order so
/// the result does not depend on the number of worker threads.
pub fn gram_columns(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let d = z.ncols();
    if n <= GRAM_BLOCK_ROWS {
        return z.tr_mul(z);
    }
    let starts: Vec<usize> = (0..n).step_by(GRAM_BLOCK_ROWS).collect();
    let partials: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&start| {
            let rows = GRAM_BLOCK_ROWS.min(n - start);
            let block = z.rows(start, rows);
            block.tr_mul(&block)
        })
        .collect();
    let mut acc = DMatrix::zeros(d, d);
    for p in &partials {
        acc += p;
    }
    acc
}
