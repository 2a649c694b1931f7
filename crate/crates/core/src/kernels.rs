//! Shift-invariant kernels, their spectral samplers and scalar feature maps.
//!
//! Two families are supported:
//!
//! * Gaussian: `k(x, y) = exp(-gamma |x - y|^2 / 2)`. Frequencies are drawn
//!   from `N(0, gamma I)` and features use arguments `v . x` without a `2 pi`
//!   factor.
//! * Even-order periodic spline on `[0, 1]`:
//!   `k_t(x, y) = 1 + sum_{m=1}^{M} m^{-t} cos(2 pi m (x - y))`. Frequencies are
//!   uniform on `[0, 1]`. Inputs outside `[0, 1]` are reduced modulo 1, which
//!   the kernel's periodicity makes exact.
//!
//! The spline feature map with half exponent `r = t / 2` is
//! `z(v, x) = 1 + sum_m m^{-r} [cos 2 pi m (v - x) + sin 2 pi m (v - x)]`,
//! which satisfies `E_v[z(v, x) z(v, y)] = k_t(x, y)` exactly and equals the
//! half-order series `1 + sum_m m^{-r}` on the diagonal `v = x`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::{Error, Result, Rng};

/// Default number of terms kept from the spline series.
pub const DEFAULT_SPLINE_TRUNCATION: usize = 5000;

/// How a Gaussian frequency is turned into feature columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureStyle {
    /// Two columns per frequency: `(cos v.x, sin v.x)`.
    CosSinPair,
    /// One column per frequency: `cos v.x + sin v.x`.
    #[default]
    CosPlusSin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Gaussian { gamma: f64, dim: usize },
    SplineEven { order: u32, truncation: usize },
}

/// A kernel together with the feature style used to approximate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    style: FeatureStyle,
}

impl KernelSpec {
    pub fn gaussian(gamma: f64, dim: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        Ok(Self {
            family: KernelFamily::Gaussian { gamma, dim },
            style: FeatureStyle::default(),
        })
    }

    pub fn spline(order: u32, truncation: usize) -> Result<Self> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "spline order must be even and at least 2, got {order}"
            )));
        }
        if truncation == 0 {
            return Err(Error::invalid("spline truncation must be at least 1"));
        }
        Ok(Self {
            family: KernelFamily::SplineEven { order, truncation },
            style: FeatureStyle::CosPlusSin,
        })
    }

    /// Select the Gaussian feature style. Spline features are always scalar,
    /// so the style is ignored for that family.
    pub fn with_style(mut self, style: FeatureStyle) -> Self {
        if matches!(self.family, KernelFamily::Gaussian { .. }) {
            self.style = style;
        }
        self
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn style(&self) -> FeatureStyle {
        self.style
    }

    /// Dimension of input points (and of frequencies).
    pub fn input_dim(&self) -> usize {
        match self.family {
            KernelFamily::Gaussian { dim, .. } => dim,
            KernelFamily::SplineEven { .. } => 1,
        }
    }

    /// Number of feature columns produced by one frequency.
    pub fn feature_width(&self) -> usize {
        match (self.family, self.style) {
            (KernelFamily::Gaussian { .. }, FeatureStyle::CosSinPair) => 2,
            _ => 1,
        }
    }

    /// Uniform bound on `|z(v, x)|` (per coordinate for pair features).
    pub fn z0(&self) -> f64 {
        match (self.family, self.style) {
            (KernelFamily::Gaussian { .. }, FeatureStyle::CosSinPair) => 1.0,
            (KernelFamily::Gaussian { .. }, FeatureStyle::CosPlusSin) => SQRT_2,
            (KernelFamily::SplineEven { order, truncation }, _) => {
                let half = f64::from(order / 2);
                1.0 + SQRT_2
                    * (1..=truncation)
                        .map(|m| (m as f64).powf(-half))
                        .sum::<f64>()
            }
        }
    }

    /// Upper bound on `|k - k_M|` caused by truncating the spline series;
    /// zero for the Gaussian kernel.
    pub fn truncation_error_bound(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian { .. } => 0.0,
            KernelFamily::SplineEven { order, truncation } => {
                let t = f64::from(order);
                (truncation as f64).powf(1.0 - t) / (t - 1.0)
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        let expected = self.input_dim();
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    /// Evaluate `k(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        self.check_dim(y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian { gamma, .. } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * gamma * d2).exp()
            }
            KernelFamily::SplineEven { order, truncation } => {
                // the series is even; |x - y| makes the result bitwise symmetric
                spline_series(wrap_unit((x[0] - y[0]).abs()), f64::from(order), truncation)
            }
        }
    }

    /// Exact Gram matrix over the rows of `x`.
    pub fn gram(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x.ncols())?;
        let n = x.nrows();
        let rows = row_vectors(x);
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| self.eval_unchecked(&rows[i], &rows[j]))
                    .collect()
            })
            .collect();
        let mut k = DMatrix::zeros(n, n);
        for (i, row) in upper.iter().enumerate() {
            for (off, &v) in row.iter().enumerate() {
                k[(i, i + off)] = v;
                k[(i + off, i)] = v;
            }
        }
        Ok(k)
    }

    /// Cross Gram matrix `k(a_i, b_j)`.
    pub fn cross_gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(a.ncols())?;
        self.check_dim(b.ncols())?;
        let ra = row_vectors(a);
        let rb = row_vectors(b);
        let rows: Vec<Vec<f64>> = ra
            .par_iter()
            .map(|xa| rb.iter().map(|xb| self.eval_unchecked(xa, xb)).collect())
            .collect();
        Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| rows[i][j]))
    }

    /// Draw `s` frequencies from the spectral measure, one per row.
    pub fn spectral_sample(&self, rng: &mut Rng, s: usize) -> DMatrix<f64> {
        match self.family {
            KernelFamily::Gaussian { gamma, dim } => {
                let sd = gamma.sqrt();
                let mut out = DMatrix::zeros(s, dim);
                for i in 0..s {
                    for j in 0..dim {
                        let g: f64 = rng.sample(StandardNormal);
                        out[(i, j)] = sd * g;
                    }
                }
                out
            }
            KernelFamily::SplineEven { .. } => {
                let mut out = DMatrix::zeros(s, 1);
                for i in 0..s {
                    out[(i, 0)] = rng.random::<f64>();
                }
                out
            }
        }
    }

    /// Feature value `z(v, x)`: one entry, or two for pair features.
    pub fn feature_value(&self, v: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        self.check_dim(x.len())?;
        Ok(match self.family {
            KernelFamily::Gaussian { .. } => {
                let a: f64 = v.iter().zip(x).map(|(p, q)| p * q).sum();
                match self.style {
                    FeatureStyle::CosPlusSin => vec![a.cos() + a.sin()],
                    FeatureStyle::CosSinPair => vec![a.cos(), a.sin()],
                }
            }
            KernelFamily::SplineEven { order, truncation } => {
                let r = f64::from(order / 2);
                let u = wrap_unit(v[0] - x[0]);
                let mut z = 1.0;
                for m in 1..=truncation {
                    let a = 2.0 * PI * m as f64 * u;
                    z += (m as f64).powf(-r) * (a.cos() + a.sin());
                }
                vec![z]
            }
        })
    }

    /// Unscaled feature block: entry `(j, i)` is `z(v_i, x_j)`; pair features
    /// occupy columns `2i` (cos) and `2i + 1` (sin).
    pub fn features(&self, freqs: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(freqs.ncols())?;
        self.check_dim(x.ncols())?;
        let s = freqs.nrows();
        let n = x.nrows();
        match self.family {
            KernelFamily::Gaussian { .. } => {
                let args = x * freqs.transpose();
                Ok(match self.style {
                    FeatureStyle::CosPlusSin => args.map(|a| a.cos() + a.sin()),
                    FeatureStyle::CosSinPair => {
                        let mut out = DMatrix::zeros(n, 2 * s);
                        for i in 0..s {
                            for j in 0..n {
                                let a = args[(j, i)];
                                out[(j, 2 * i)] = a.cos();
                                out[(j, 2 * i + 1)] = a.sin();
                            }
                        }
                        out
                    }
                })
            }
            KernelFamily::SplineEven { truncation, .. } => {
                let basis = self
                    .spline_basis(x)?
                    .expect("spline family always has a basis");
                let mut coef = DMatrix::zeros(2 * truncation + 1, s);
                for i in 0..s {
                    let v = freqs[(i, 0)];
                    coef[(0, i)] = 1.0;
                    for m in 1..=truncation {
                        let a = 2.0 * PI * m as f64 * wrap_unit(v);
                        let (sa, ca) = a.sin_cos();
                        coef[(m, i)] = ca + sa;
                        coef[(truncation + m, i)] = sa - ca;
                    }
                }
                Ok(basis * coef)
            }
        }
    }

    /// Exact finite factorisation `K = B B^T` of the truncated spline kernel,
    /// with columns `[1, m^{-t/2} cos 2 pi m x, m^{-t/2} sin 2 pi m x]`.
    /// Returns `None` for the Gaussian family.
    pub fn spline_basis(&self, x: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
        let KernelFamily::SplineEven { order, truncation } = self.family else {
            return Ok(None);
        };
        self.check_dim(x.ncols())?;
        let r = f64::from(order / 2);
        let n = x.nrows();
        let mut b = DMatrix::zeros(n, 2 * truncation + 1);
        for j in 0..n {
            let xj = wrap_unit(x[(j, 0)]);
            b[(j, 0)] = 1.0;
            for m in 1..=truncation {
                let w = (m as f64).powf(-r);
                let (sa, ca) = (2.0 * PI * m as f64 * xj).sin_cos();
                b[(j, m)] = w * ca;
                b[(j, truncation + m)] = w * sa;
            }
        }
        Ok(Some(b))
    }
}

/// Reduce to `[0, 1)`.
pub fn wrap_unit(u: f64) -> f64 {
    let w = u - u.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// `1 + sum_{m=1}^{M} m^{-t} cos(2 pi m u)`, using a rotation recurrence for
/// the cosines.
pub fn spline_series(u: f64, t: f64, truncation: usize) -> f64 {
    let (s1, c1) = (2.0 * PI * u).sin_cos();
    let (mut c, mut s) = (c1, s1);
    let mut acc = 0.0;
    for m in 1..=truncation {
        if m.is_multiple_of(64) {
            // re-anchor to keep the recurrence error from accumulating
            let (sm, cm) = (2.0 * PI * m as f64 * u).sin_cos();
            c = cm;
            s = sm;
        }
        acc += (m as f64).powf(-t) * c;
        let next_c = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = next_c;
    }
    1.0 + acc
}

fn row_vectors(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn gaussian_zero_distance_is_one() {
        let k = KernelSpec::gaussian(1.0, 3).unwrap();
        let x = [0.3, -1.0, 2.0];
        assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_matches_closed_form() {
        let k = KernelSpec::gaussian(2.5, 2).unwrap();
        let got = k.eval(&[0.0, 1.0], &[1.0, -1.0]).unwrap();
        assert!((got - (-0.5 * 2.5 * 5.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn spline_diagonal_approaches_zeta() {
        let m = 1_000_000;
        let k = KernelSpec::spline(2, m).unwrap();
        let got = k.eval(&[0.4], &[0.4]).unwrap();
        let limit = 1.0 + PI * PI / 6.0;
        assert!(limit - got > 0.0 && limit - got <= 1.0 / m as f64);
        assert!((got - 2.6449341).abs() < 2e-6);
    }

    #[test]
    fn spline_matches_bernoulli_closed_form() {
        let m = 20_000;
        let k = KernelSpec::spline(2, m).unwrap();
        for &(x, y) in &[(0.1, 0.0), (0.75, 0.2), (0.05, 0.9), (0.5, 0.5)] {
            let u = wrap_unit(x - y);
            let closed = 1.0 + PI * PI * (u * u - u + 1.0 / 6.0);
            let got = k.eval(&[x], &[y]).unwrap();
            assert!(
                (got - closed).abs() <= 2.0 / m as f64,
                "u={u}: {got} vs {closed}"
            );
        }
    }

    #[test]
    fn spline_recurrence_matches_direct_sum() {
        let t = 4.0;
        for &u in &[0.0, 0.123, 0.5, 0.987] {
            let direct: f64 = 1.0
                + (1..=3000)
                    .map(|m| (m as f64).powf(-t) * (2.0 * PI * m as f64 * u).cos())
                    .sum::<f64>();
            assert!((spline_series(u, t, 3000) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn spline_inputs_wrap() {
        let k = KernelSpec::spline(2, 50).unwrap();
        let a = k.eval(&[1.3], &[0.1]).unwrap();
        let b = k.eval(&[0.3], &[0.1]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let k = KernelSpec::gaussian(1.0, 2).unwrap();
        assert!(matches!(
            k.eval(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::gaussian(0.0, 1).is_err());
        assert!(KernelSpec::gaussian(1.0, 0).is_err());
        assert!(KernelSpec::spline(3, 10).is_err());
        assert!(KernelSpec::spline(0, 10).is_err());
        assert!(KernelSpec::spline(2, 0).is_err());
    }

    #[test]
    fn gram_single_point() {
        let k = KernelSpec::spline(2, 100).unwrap();
        let x = DMatrix::from_element(1, 1, 0.25);
        let g = k.gram(&x).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g[(0, 0)], k.eval(&[0.25], &[0.25]).unwrap());
    }

    #[test]
    fn gram_duplicated_rows_are_identical() {
        let k = KernelSpec::gaussian(1.0, 2).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.5, -0.3, 0.1, 0.2]);
        let g = k.gram(&x).unwrap();
        assert_eq!(g.row(0), g.row(2));
    }

    #[test]
    fn spline_basis_factorises_gram() {
        let k = KernelSpec::spline(4, 30).unwrap();
        let x = DMatrix::from_fn(12, 1, |i, _| (i as f64 * 0.37).fract());
        let b = k.spline_basis(&x).unwrap().unwrap();
        let g = k.gram(&x).unwrap();
        assert!((&b * b.transpose() - g).amax() < 1e-12);
    }

    #[test]
    fn cos_plus_sin_at_zero_argument() {
        let k = KernelSpec::gaussian(1.0, 2).unwrap();
        assert_eq!(
            k.feature_value(&[1.0, -1.0], &[0.5, 0.5]).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn spline_feature_on_diagonal_is_harmonic_sum() {
        let k = KernelSpec::spline(2, 100).unwrap();
        let z = k.feature_value(&[0.3], &[0.3]).unwrap()[0];
        let harmonic: f64 = (1..=100).map(|m| 1.0 / m as f64).sum();
        assert!((z - (1.0 + harmonic)).abs() < 1e-12);
        assert!((z - 6.1874).abs() < 1e-4);
    }

    #[test]
    fn bulk_features_match_pointwise() {
        let mut rng = seeded_rng(3);
        for spec in [
            KernelSpec::gaussian(0.7, 2).unwrap(),
            KernelSpec::gaussian(0.7, 2)
                .unwrap()
                .with_style(FeatureStyle::CosSinPair),
            KernelSpec::spline(2, 40).unwrap(),
        ] {
            let d = spec.input_dim();
            let v = spec.spectral_sample(&mut rng, 5);
            let x = DMatrix::from_fn(7, d, |i, j| ((i + 2 * j) as f64 * 0.131).fract());
            let z = spec.features(&v, &x).unwrap();
            let w = spec.feature_width();
            for i in 0..5 {
                for j in 0..7 {
                    let vi: Vec<f64> = v.row(i).iter().copied().collect();
                    let xj: Vec<f64> = x.row(j).iter().copied().collect();
                    let pt = spec.feature_value(&vi, &xj).unwrap();
                    for c in 0..w {
                        assert!((z[(j, w * i + c)] - pt[c]).abs() < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn features_bounded_by_z0() {
        let mut rng = seeded_rng(9);
        for spec in [
            KernelSpec::gaussian(3.0, 1).unwrap(),
            KernelSpec::spline(4, 25).unwrap(),
        ] {
            let v = spec.spectral_sample(&mut rng, 50);
            let x = DMatrix::from_fn(40, 1, |i, _| i as f64 / 40.0);
            let z = spec.features(&v, &x).unwrap();
            assert!(z.amax() <= spec.z0() + 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = KernelSpec::gaussian(2.0, 3).unwrap();
        let a = spec.spectral_sample(&mut seeded_rng(11), 20);
        let b = spec.spectral_sample(&mut seeded_rng(11), 20);
        assert_eq!(a, b);
    }
}
