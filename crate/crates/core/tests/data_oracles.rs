mod common;

use nalgebra::DVector;

use common::normal_matrix;
use levrff::data::{
    generate_spline_sim, make_folds, parse_sparse_dataset, parse_sparse_str, standardize,
    train_test_split, write_sparse_dataset, Dataset, SplineSimConfig, Task,
};
use levrff::{seeded_rng, Error};

#[test]
fn sparse_line_fills_missing_columns_with_zero() {
    let ds = parse_sparse_str("1.5 1:0.5 3:2.0\n", "mem", "t", None).unwrap();
    assert_eq!(ds.task, Task::Regression);
    assert_eq!(ds.x.shape(), (1, 3));
    assert_eq!(
        ds.x.row(0).iter().copied().collect::<Vec<_>>(),
        vec![0.5, 0.0, 2.0]
    );
    assert_eq!(ds.y[0], 1.5);
}

#[test]
fn zero_one_labels_become_signs() {
    let ds = parse_sparse_str(
        "0 1:1\n1 2:1\n1 1:3\n# comment\n\n0 2:2\n",
        "mem",
        "t",
        None,
    )
    .unwrap();
    assert_eq!(ds.task, Task::Classification);
    assert_eq!(ds.y.as_slice(), &[-1.0, 1.0, 1.0, -1.0]);
    let ds = parse_sparse_str("-1 1:1\n1 1:2\n", "mem", "t", None).unwrap();
    assert_eq!(ds.y.as_slice(), &[-1.0, 1.0]);
}

#[test]
fn forced_regression_keeps_integer_labels() {
    let ds = parse_sparse_str("0 1:1\n1 1:2\n", "mem", "t", Some(Task::Regression)).unwrap();
    assert_eq!(ds.y.as_slice(), &[0.0, 1.0]);
}

#[test]
fn malformed_lines_report_their_position() {
    for (text, line) in [
        ("1 1:2\n1 x:2\n", 2),
        ("1 1:2\n\n1 0:2\n", 3),
        ("a 1:1\n", 1),
        ("1 1-2\n", 1),
    ] {
        match parse_sparse_str(text, "bad.txt", "t", None) {
            Err(Error::Parse {
                path, line: got, ..
            }) => {
                assert_eq!(path, "bad.txt");
                assert_eq!(got, line, "{text:?}");
            }
            other => panic!("expected a parse error for {text:?}, got {other:?}"),
        }
    }
    assert!(parse_sparse_str("# only comments\n", "mem", "t", None).is_err());
}

#[test]
fn written_dataset_reads_back_bit_exact() {
    let mut rng = seeded_rng(4);
    let mut x = normal_matrix(30, 5, &mut rng);
    x[(3, 2)] = 0.0;
    x[(7, 4)] = 1e-310;
    x[(0, 0)] = -0.0;
    let y = DVector::from_fn(30, |i, _| (i as f64).sqrt() * 1.1);
    let ds = Dataset::new(x, y, Task::Regression, "round").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("round.txt");
    write_sparse_dataset(&ds, &path).unwrap();
    let back = parse_sparse_dataset(&path, Some(Task::Regression)).unwrap();
    assert_eq!(back.x.shape(), ds.x.shape());
    for (a, b) in back.x.iter().zip(ds.x.iter()) {
        // negative zero is written as an omitted entry
        assert!(a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0));
    }
    for (a, b) in back.y.iter().zip(ds.y.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = parse_sparse_dataset(dir.path().join("absent.txt"), None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn standardisation_is_invertible() {
    let mut rng = seeded_rng(5);
    let mut x = normal_matrix(200, 4, &mut rng) * 3.0;
    for i in 0..200 {
        x[(i, 1)] += 100.0;
        x[(i, 3)] = 7.0;
    }
    let ds = Dataset::new(x.clone(), DVector::zeros(200), Task::Regression, "s").unwrap();
    let (out, t) = standardize(&ds).unwrap();
    assert_eq!(t.constant, vec![false, false, false, true]);
    for j in 0..4 {
        let col = out.x.column(j);
        let mean = col.sum() / 200.0;
        assert!(mean.abs() <= 1e-10);
        if !t.constant[j] {
            let var = col.iter().map(|v| v * v).sum::<f64>() / 200.0;
            assert!((var - 1.0).abs() <= 1e-10);
            for i in 0..200 {
                let restored = out.x[(i, j)] * t.std[j] + t.mean[j];
                assert!((restored - x[(i, j)]).abs() <= 1e-12 * x[(i, j)].abs().max(1.0));
            }
        }
    }
    assert_eq!(t.apply(&x).unwrap(), out.x);
}

#[test]
fn simulation_noise_is_centred_with_the_right_scale() {
    let config = SplineSimConfig {
        n: 100_000,
        sigma: 0.3,
        ..SplineSimConfig::default()
    };
    let (ds, target) = generate_spline_sim(&config, &mut seeded_rng(6)).unwrap();
    let resid: Vec<f64> = (0..ds.n())
        .map(|i| ds.y[i] - target.eval(ds.x[(i, 0)]))
        .collect();
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    assert!(mean.abs() <= 3.0 * 0.3 / n.sqrt(), "noise mean {mean}");
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var.sqrt() - 0.3).abs() < 0.01);
    assert!(ds.x.iter().all(|&v| (0.0..1.0).contains(&v)));
}

#[test]
fn noiseless_simulation_hits_the_target() {
    let config = SplineSimConfig {
        n: 500,
        sigma: 0.0,
        t: 4,
        r: 2,
        ..SplineSimConfig::default()
    };
    let (ds, target) = generate_spline_sim(&config, &mut seeded_rng(7)).unwrap();
    for i in 0..ds.n() {
        assert_eq!(ds.y[i], target.eval(ds.x[(i, 0)]));
    }
    assert_eq!(target.rkhs_norm(), target.eval(config.x0).sqrt());
}

#[test]
fn folds_partition_and_depend_on_the_seed() {
    let a = make_folds(100, 5, &mut seeded_rng(1)).unwrap();
    let b = make_folds(100, 5, &mut seeded_rng(2)).unwrap();
    let mut all: Vec<usize> = a.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    assert!(a.iter().all(|f| f.len() == 20));
    assert_ne!(a, b);
    assert_eq!(a, make_folds(100, 5, &mut seeded_rng(1)).unwrap());
    assert!(make_folds(3, 4, &mut seeded_rng(1)).is_err());
    assert!(make_folds(10, 1, &mut seeded_rng(1)).is_err());
}

#[test]
fn split_sizes_follow_the_fraction() {
    let (train, test) = train_test_split(1000, 0.3, &mut seeded_rng(8)).unwrap();
    assert_eq!((train.len(), test.len()), (700, 300));
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..1000).collect::<Vec<_>>());
    let (train, test) = train_test_split(2, 0.01, &mut seeded_rng(8)).unwrap();
    assert_eq!((train.len(), test.len()), (1, 1));
}
