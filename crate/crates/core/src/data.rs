//! Datasets: sparse text ingestion, standardisation, the periodic spline
//! simulation and resampling plans.
//!
//! The sparse text format has one example per line,
//! `label idx:value idx:value ...`, with 1-based feature indices. Missing
//! indices are zero. Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::kernels::KernelSpec;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" | "reg" => Ok(Task::Regression),
            "classification" | "class" | "clf" => Ok(Task::Classification),
            other => Err(Error::invalid(format!("unknown task '{other}'"))),
        }
    }
}

/// Dense dataset; rows of `x` are examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub task: Task,
    pub name: String,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        task: Task,
        name: impl Into<String>,
    ) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Data("dataset has no examples".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "dataset contains NaN or infinite values".into(),
            ));
        }
        if task == Task::Classification && y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::Data("classification labels must be -1 or +1".into()));
        }
        Ok(Self {
            x,
            y,
            task,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: select_rows(&self.x, idx),
            y: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i])),
            task: self.task,
            name: self.name.clone(),
        }
    }

    /// Random subsample of `m` rows without replacement (all rows if `m >= n`).
    pub fn subsample(&self, m: usize, rng: &mut Rng) -> Dataset {
        if m >= self.n() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.shuffle(rng);
        idx.truncate(m);
        idx.sort_unstable();
        self.subset(&idx)
    }
}

pub(crate) fn select_rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Read a sparse text dataset. The task is inferred when `task` is `None`:
/// at most two distinct integer labels means classification.
pub fn parse_sparse_dataset(path: impl AsRef<Path>, task: Option<Task>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    parse_sparse_str(&text, &path.display().to_string(), &name, task)
}

/// Parse sparse text held in memory; `origin` labels error messages.
pub fn parse_sparse_str(
    text: &str,
    origin: &str,
    name: &str,
    task: Option<Task>,
) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_col = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(lineno, format!("invalid label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(err(lineno, format!("label '{label_tok}' is not finite")));
        }
        let mut entries = Vec::new();
        let mut last = 0usize;
        let mut monotone = true;
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected index:value, found '{tok}'")))?;
            if idx_s == "qid" {
                continue;
            }
            let idx: usize = idx_s
                .parse()
                .map_err(|_| err(lineno, format!("invalid feature index '{idx_s}'")))?;
            if idx == 0 {
                return Err(err(lineno, "feature indices are 1-based".into()));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| err(lineno, format!("invalid feature value '{val_s}'")))?;
            if !val.is_finite() {
                return Err(err(
                    lineno,
                    format!("feature value '{val_s}' is not finite"),
                ));
            }
            if idx <= last {
                monotone = false;
            }
            last = idx;
            max_col = max_col.max(idx);
            entries.push((idx - 1, val));
        }
        if !monotone {
            warn!("{origin}:{lineno}: feature indices are not strictly increasing");
        }
        labels.push(label);
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{origin}: no examples found")));
    }
    let mut x = DMatrix::zeros(rows.len(), max_col);
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            x[(i, j)] = v;
        }
    }
    let distinct: BTreeSet<i64> = labels
        .iter()
        .filter(|v| v.fract() == 0.0)
        .map(|&v| v as i64)
        .collect();
    let all_integer = labels.iter().all(|v| v.fract() == 0.0);
    let task = task.unwrap_or(if all_integer && distinct.len() <= 2 {
        Task::Classification
    } else {
        Task::Regression
    });
    let y = match task {
        Task::Regression => DVector::from_vec(labels),
        Task::Classification => DVector::from_vec(map_binary_labels(&labels, origin)?),
    };
    debug!(
        "{origin}: parsed {} examples with {} features as {task}",
        x.nrows(),
        x.ncols()
    );
    Dataset::new(x, y, task, name)
}

fn map_binary_labels(labels: &[f64], origin: &str) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in labels {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    distinct.sort_by(f64::total_cmp);
    if distinct.len() > 2 {
        return Err(Error::Data(format!(
            "{origin}: classification needs two label values, found {}",
            distinct.len()
        )));
    }
    let (neg, pos) = match distinct.as_slice() {
        [a, b] => (*a, *b),
        [a] if *a > 0.0 => (f64::NAN, *a),
        [a] => (*a, f64::NAN),
        _ => unreachable!("at least one label"),
    };
    if !(neg == -1.0 || neg.is_nan()) || !(pos == 1.0 || pos.is_nan()) {
        info!("{origin}: mapping labels {neg} -> -1 and {pos} -> +1");
    }
    Ok(labels
        .iter()
        .map(|&v| if v == pos { 1.0 } else { -1.0 })
        .collect())
}

/// Write a dataset in sparse text form. Values use the shortest decimal
/// representation that reads back to the same bits; exact zeros are omitted
/// except for the last column of the first row, which pins the width.
pub fn write_sparse_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let d = dataset.dim();
    for i in 0..dataset.n() {
        out.push_str(&format!("{}", dataset.y[i]));
        for j in 0..d {
            let v = dataset.x[(i, j)];
            if v.to_bits() != 0 || (i == 0 && j + 1 == d) {
                out.push_str(&format!(" {}:{}", j + 1, v));
            }
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Column-wise affine transform learned on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with (numerically) zero variance; they are mapped to 0.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if self.constant[j] {
                0.0
            } else {
                (x[(i, j)] - self.mean[j]) / self.std[j]
            }
        }))
    }
}

/// Centre and scale each column to mean 0 and (population) standard deviation 1.
pub fn standardize(dataset: &Dataset) -> Result<(Dataset, Standardizer)> {
    let n = dataset.n();
    if n < 2 {
        return Err(Error::Data(
            "standardisation needs at least two examples".into(),
        ));
    }
    let d = dataset.dim();
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    let mut constant = vec![false; d];
    for j in 0..d {
        let col = dataset.x.column(j);
        let m = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        mean[j] = m;
        std[j] = var.sqrt();
        if std[j] <= 1e-12 * m.abs().max(1.0) {
            constant[j] = true;
            warn!("{}: column {} has zero variance", dataset.name, j + 1);
        }
    }
    let transform = Standardizer {
        mean,
        std,
        constant,
    };
    let x = transform.apply(&dataset.x)?;
    let out = Dataset {
        x,
        ..dataset.clone()
    };
    Ok((out, transform))
}

/// Settings of the periodic spline regression simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineSimConfig {
    /// Order of the kernel defining the target `k_t(., x0)`.
    pub t: u32,
    /// Half order of the learning kernel `k_{2r}`.
    pub r: u32,
    pub x0: f64,
    pub sigma: f64,
    pub n: usize,
    pub truncation: usize,
}

/// Truncation used by the simulation unless configured otherwise.
pub const SIM_TRUNCATION: usize = 128;

impl Default for SplineSimConfig {
    fn default() -> Self {
        Self {
            t: 2,
            r: 1,
            x0: 0.5,
            sigma: 0.3,
            n: 1000,
            truncation: SIM_TRUNCATION,
        }
    }
}

impl SplineSimConfig {
    pub fn validate(&self) -> Result<()> {
        KernelSpec::spline(self.t, self.truncation)?;
        self.learning_kernel()?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "noise level must be nonnegative, got {}",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.x0) {
            return Err(Error::invalid(format!(
                "x0 must lie in [0, 1], got {}",
                self.x0
            )));
        }
        if self.n == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        Ok(())
    }

    /// The kernel `k_{2r}` used by the learners.
    pub fn learning_kernel(&self) -> Result<KernelSpec> {
        KernelSpec::spline(2 * self.r, self.truncation)
    }

    pub fn target(&self) -> Result<SplineTarget> {
        Ok(SplineTarget {
            kernel: KernelSpec::spline(self.t, self.truncation)?,
            x0: self.x0,
        })
    }
}

/// The noiseless regression function `x -> k_t(x, x0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineTarget {
    pub kernel: KernelSpec,
    pub x0: f64,
}

impl SplineTarget {
    pub fn eval(&self, x: f64) -> f64 {
        self.kernel.eval(&[x], &[self.x0]).expect("scalar inputs")
    }

    pub fn eval_rows(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(x.nrows(), |i, _| self.eval(x[(i, 0)]))
    }

    /// RKHS norm of `k_t(., x0)` in its own space, `sqrt(k_t(x0, x0))`.
    pub fn rkhs_norm(&self) -> f64 {
        self.eval(self.x0).sqrt()
    }
}

/// Draw `x ~ U[0,1]^n` and `y = k_t(x, x0) + sigma * eps`.
pub fn generate_spline_sim(
    config: &SplineSimConfig,
    rng: &mut Rng,
) -> Result<(Dataset, SplineTarget)> {
    config.validate()?;
    let target = config.target()?;
    let x = DMatrix::from_fn(config.n, 1, |_, _| rng.random::<f64>());
    let mut y = target.eval_rows(&x);
    if config.sigma > 0.0 {
        for v in y.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += config.sigma * e;
        }
    }
    let name = format!("spline_t{}_r{}", config.t, config.r);
    Ok((Dataset::new(x, y, Task::Regression, name)?, target))
}

/// Uniform points on `[0, 1]` for risk evaluation.
pub fn uniform_points(m: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, 1, |_, _| rng.random::<f64>())
}

/// Shuffle `0..n` and cut it into `k` folds whose sizes differ by at most one.
/// Each fold is returned in increasing order.
pub fn make_folds(n: usize, k: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least two folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "cannot split {n} examples into {k} folds"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Random train/test split; the test part has `round(test_fraction * n)`
/// examples, at least one and leaving at least one for training.
pub fn train_test_split(
    n: usize,
    test_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Data("a split needs at least two examples".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn parses_basic_line() {
        let ds = parse_sparse_str("1 1:0.5 3:2.0\n", "mem", "t", None).unwrap();
        assert_eq!(ds.y[0], 1.0);
        assert_eq!(
            ds.x.row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.5, 0.0, 2.0]
        );
    }

    #[test]
    fn remaps_zero_one_labels() {
        let ds = parse_sparse_str("0 1:1\n1 1:2\n0 2:1\n", "mem", "t", None).unwrap();
        assert_eq!(ds.task, Task::Classification);
        assert_eq!(ds.y.as_slice(), &[-1.0, 1.0, -1.0]);
    }

    #[test]
    fn remaps_one_two_labels() {
        let ds = parse_sparse_str("2 1:1\n1 1:2\n", "mem", "t", None).unwrap();
        assert_eq!(ds.y.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn regression_inferred_for_real_labels() {
        let ds = parse_sparse_str("0.5 1:1\n1.5 1:2\n2 1:3\n", "mem", "t", None).unwrap();
        assert_eq!(ds.task, Task::Regression);
    }

    #[test]
    fn malformed_line_reports_location() {
        let err = parse_sparse_str("1 1:0.5\n\n1 2-0.3\n", "file.txt", "t", None).unwrap_err();
        match err {
            Error::Parse { path, line, .. } => {
                assert_eq!(path, "file.txt");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_zero_index_and_bad_values() {
        assert!(parse_sparse_str("1 0:1\n", "m", "t", None).is_err());
        assert!(parse_sparse_str("1 1:abc\n", "m", "t", None).is_err());
        assert!(parse_sparse_str("x 1:1\n", "m", "t", None).is_err());
        assert!(parse_sparse_str("1 1:nan\n", "m", "t", None).is_err());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            parse_sparse_str("\n# c\n", "m", "t", None),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn non_monotone_indices_are_accepted() {
        let ds = parse_sparse_str("1 3:1 1:2\n", "m", "t", None).unwrap();
        assert_eq!(
            ds.x.row(0).iter().copied().collect::<Vec<_>>(),
            vec![2.0, 0.0, 1.0]
        );
    }

    #[test]
    fn constant_column_is_flagged() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.1, 2.0, 0.1, 4.0, 0.1]);
        let ds = Dataset::new(
            x,
            DVector::from_vec(vec![0.0, 1.0, 2.0]),
            Task::Regression,
            "c",
        )
        .unwrap();
        let (out, tr) = standardize(&ds).unwrap();
        assert!(tr.constant[1] && !tr.constant[0]);
        assert!(out.x.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn folds_of_ten_by_five() {
        let folds = make_folds(10, 5, &mut seeded_rng(0)).unwrap();
        assert_eq!(folds.len(), 5);
        assert!(folds.iter().all(|f| f.len() == 2));
    }

    #[test]
    fn folds_reject_bad_sizes() {
        assert!(make_folds(3, 5, &mut seeded_rng(0)).is_err());
        assert!(make_folds(10, 1, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn zero_noise_simulation_is_exact() {
        let cfg = SplineSimConfig {
            sigma: 0.0,
            n: 50,
            ..Default::default()
        };
        let (ds, f) = generate_spline_sim(&cfg, &mut seeded_rng(4)).unwrap();
        for i in 0..ds.n() {
            assert_eq!(ds.y[i], f.eval(ds.x[(i, 0)]));
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = SplineSimConfig::default();
        let a = generate_spline_sim(&cfg, &mut seeded_rng(4)).unwrap().0;
        let b = generate_spline_sim(&cfg, &mut seeded_rng(4)).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = train_test_split(1000, 0.3, &mut seeded_rng(1)).unwrap();
        assert_eq!((tr.len(), te.len()), (700, 300));
    }
}
