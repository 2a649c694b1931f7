mod common;

use nalgebra::DMatrix;

use common::{random_psd, uniform_matrix};
use levrff::diagnostics::{
    decay_report, fixed_point_bound, required_features, whitened_error_norm, AnalysisConstants,
    CountRule, DecayModel,
};
use levrff::kernels::KernelSpec;
use levrff::linalg::sym_eigenvalues;
use levrff::seeded_rng;

#[test]
fn whitened_norm_of_diagonal_shift_has_closed_form() {
    let mut rng = seeded_rng(1);
    let n = 25;
    let k = random_psd(n, 10, &mut rng);
    let lambda = 0.02;
    let c = n as f64 * lambda;
    let shifted = &k + DMatrix::identity(n, n) * c;
    let got = whitened_error_norm(&k, &shifted, lambda).unwrap();
    let oracle = sym_eigenvalues(&k)
        .iter()
        .map(|&mu| c / (mu.max(0.0) + c))
        .fold(0.0, f64::max);
    assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    // rank 10 < n leaves a null direction where the ratio reaches one
    assert!((got - 1.0).abs() < 1e-10);
}

#[test]
fn whitened_norm_below_spectral_ratio() {
    let mut rng = seeded_rng(2);
    for _ in 0..10 {
        let n = 20;
        let k = random_psd(n, 20, &mut rng);
        let e = random_psd(n, 3, &mut rng) * 0.1;
        let lambda = 0.01;
        let w = whitened_error_norm(&k, &(&k + &e), lambda).unwrap();
        let bound = sym_eigenvalues(&e).amax() / (n as f64 * lambda);
        assert!(w <= bound * (1.0 + 1e-10));
        let w_neg = whitened_error_norm(&k, &(&k - &e), lambda).unwrap();
        assert!((w - w_neg).abs() < 1e-10);
    }
}

fn brute_force_bound(eigs: &[f64], n: usize, lambda: f64, e7: f64) -> (f64, Vec<f64>) {
    let nf = n as f64;
    let values: Vec<f64> = (0..=n)
        .map(|h| {
            let tail: f64 = eigs.iter().skip(h).sum();
            h as f64 / nf * e7 / (nf * nf * lambda * lambda) + (tail / nf).sqrt()
        })
        .collect();
    (values.iter().copied().fold(f64::INFINITY, f64::min), values)
}

#[test]
fn fixed_point_bound_matches_exhaustive_search() {
    let n = 256;
    let eigs: Vec<f64> = (1..=n).map(|i| 0.5f64.powi(i as i32)).collect();
    for lambda in [1e-4, 1e-3, 1e-2] {
        let e7 = AnalysisConstants::default().e7();
        let got = fixed_point_bound(&eigs, n, lambda, e7).unwrap();
        let (oracle, values) = brute_force_bound(&eigs, n, lambda, e7);
        assert!((got - oracle).abs() <= 1e-12 * oracle.max(1.0));
        let h = (n as f64).ln().ceil() as usize;
        assert!(got <= values[h] + 1e-15);
    }
}

#[test]
fn fixed_point_bound_single_eigenvalue() {
    // h = 1 removes the tail: candidates sqrt(a/n) at h = 0 and e7/(n^3 lambda^2) at h = 1
    let (n, lambda, a) = (10, 1.0, 5.0);
    let got = fixed_point_bound(&[a], n, lambda, 1.0).unwrap();
    assert!((got - 1.0 / 1000.0).abs() < 1e-15);
    assert_eq!(fixed_point_bound(&[0.0; 4], 4, 0.3, 1.0).unwrap(), 0.0);
}

fn exponential_spectrum() -> Vec<f64> {
    (1..=60).map(|i| 0.5f64.powi(i)).collect()
}

#[test]
fn fixed_point_bound_nonincreasing_with_n_lambda_fixed() {
    let eigs = exponential_spectrum();
    for c in [1.0, 10.0, 1e3, 1e5] {
        let values: Vec<f64> = [16, 32, 64, 128, 256, 512, 1024]
            .iter()
            .map(|&n| fixed_point_bound(&eigs, n, c / n as f64, 1.0).unwrap())
            .collect();
        assert!(
            values.windows(2).all(|w| w[1] <= w[0]),
            "c = {c}: {values:?}"
        );
    }
}

#[test]
fn fixed_point_bound_with_lambda_n_squared_fixed() {
    let eigs = exponential_spectrum();
    let ns = [16, 32, 64, 128, 256, 512, 1024];
    let at = |c: f64| -> Vec<f64> {
        ns.iter()
            .map(|&n| fixed_point_bound(&eigs, n, c / (n * n) as f64, 1.0).unwrap())
            .collect()
    };
    // with a small constant the h = 0 term wins and the bound falls like n^{-1/2}
    let small = at(1.0);
    assert!(small.windows(2).all(|w| w[1] <= w[0]));
    // with a large constant the h-linear term grows like n and the bound rises again
    let large = at(1e3);
    assert!(large[2] > large[1], "{large:?}");
}

#[test]
fn required_feature_counts() {
    assert_eq!(
        required_features(CountRule::LeverageRff, 10.0, 0.01, 1.0, 0.1).unwrap(),
        369
    );
    let plain = required_features(CountRule::PlainRff, 10.0, 0.01, 1.0, 0.1).unwrap();
    assert!(plain > 369);
}

#[test]
fn gaussian_spectrum_decays_exponentially() {
    let n = 300;
    let x = uniform_matrix(n, 1, 0.0, 1.0, &mut seeded_rng(3));
    let k = KernelSpec::gaussian(1.0, 1).unwrap().gram(&x).unwrap();
    let report = decay_report(&k, n).unwrap();
    assert_eq!(report.fitted_model, DecayModel::Exponential, "{report:?}");
}

#[test]
fn constructed_spectra_are_classified() {
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(30, |i, _| {
        30.0 * 0.7f64.powi(i as i32 + 1)
    }));
    let r = decay_report(&k, 30).unwrap();
    assert_eq!(r.fitted_model, DecayModel::Exponential);
    assert!((r.fit_exponent - 0.7f64.ln()).abs() < 1e-9);
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(30, |i, _| {
        30.0 / ((i + 1) as f64).powi(2)
    }));
    let r = decay_report(&k, 30).unwrap();
    assert_eq!(r.fitted_model, DecayModel::Polynomial);
    assert!((r.fit_exponent + 2.0).abs() < 1e-9);
}
