//! CSV output for experiment results.
//!
//! Floats are written as `{:.16e}` (17 significant digits) so parsing them
//! back recovers the same `f64`; summary lines follow the rows as
//! `# key = value` comments.

use std::fmt::Write as _;
use std::path::Path;

use super::{DiagnoseResult, ExperimentResult, ResultRow};
use crate::features::Scheme;
use crate::{Error, Result};

pub const RESULT_HEADER: &str =
    "n,lambda,s,scheme,rep,train_metric,test_metric,excess_risk,wall_time_ms";
pub const DIAGNOSE_HEADER: &str = "n,lambda,s,scheme,rep,dof,dof_approx,leverage_total,whitened_error_norm,required_plain,required_leverage,fixed_point_bound";

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_summary(out: &mut String, summary: &[(String, String)]) {
    for (k, v) in summary {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

pub fn write_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            f(r.lambda),
            r.s,
            r.scheme,
            r.rep,
            f(r.train_metric),
            f(r.test_metric),
            f(r.excess_risk),
            f(r.wall_time_ms)
        );
    }
    push_summary(&mut out, &result.summary);
    out
}

pub fn write_diagnose_csv(result: &DiagnoseResult) -> String {
    let mut out = String::from(DIAGNOSE_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            f(r.lambda),
            r.s,
            r.scheme,
            r.rep,
            f(r.dof),
            f(r.dof_approx),
            f(r.leverage_total),
            f(r.whitened_error_norm),
            r.required_plain,
            r.required_leverage,
            f(r.fixed_point_bound)
        );
    }
    push_summary(&mut out, &result.summary);
    out
}

fn write_file(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write `result` to `path`.
pub fn emit_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    write_file(&write_csv(result), path.as_ref())
}

pub fn emit_diagnose_csv(result: &DiagnoseResult, path: impl AsRef<Path>) -> Result<()> {
    write_file(&write_diagnose_csv(result), path.as_ref())
}

/// Parse text produced by [`write_csv`]. The slope is not restored.
pub fn parse_csv(text: &str) -> Result<ExperimentResult> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, message: String| Error::Parse {
        path: "<csv>".into(),
        line: line + 1,
        message,
    };
    match lines.next() {
        Some((_, h)) if h == RESULT_HEADER => {}
        _ => return Err(bad(0, "missing result header".into())),
    }
    let mut result = ExperimentResult::default();
    for (i, line) in lines {
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .trim_start()
                .split_once(" = ")
                .ok_or_else(|| bad(i, format!("malformed summary line '{line}'")))?;
            result.summary.push((k.to_string(), v.to_string()));
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(bad(i, format!("expected 9 fields, found {}", fields.len())));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| bad(i, format!("'{s}': {e}")))
        };
        let float = |s: &str| s.parse::<f64>().map_err(|e| bad(i, format!("'{s}': {e}")));
        result.rows.push(ResultRow {
            n: int(fields[0])?,
            lambda: float(fields[1])?,
            s: int(fields[2])?,
            scheme: fields[3]
                .parse::<Scheme>()
                .map_err(|e| bad(i, e.to_string()))?,
            rep: int(fields[4])?,
            train_metric: float(fields[5])?,
            test_metric: float(fields[6])?,
            excess_risk: float(fields[7])?,
            wall_time_ms: float(fields[8])?,
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentResult {
        ExperimentResult {
            rows: vec![
                ResultRow {
                    n: 128,
                    lambda: 1.0 / 128f64.sqrt(),
                    s: 17,
                    scheme: Scheme::ExactLeverage,
                    rep: 3,
                    train_metric: 0.1 + 0.2,
                    test_metric: std::f64::consts::PI,
                    excess_risk: f64::NAN,
                    wall_time_ms: 0.0,
                },
                ResultRow {
                    n: 256,
                    lambda: 1e-300,
                    s: 1,
                    scheme: Scheme::Plain,
                    rep: 0,
                    train_metric: -2.5e-17,
                    test_metric: f64::MAX,
                    excess_risk: 5e-324,
                    wall_time_ms: 12.75,
                },
            ],
            summary: vec![
                ("slope".into(), "-5.0e-1".into()),
                ("experiment".into(), "x".into()),
            ],
            slope: None,
        }
    }

    #[test]
    fn empty_result_is_header_and_summary() {
        let r = ExperimentResult {
            summary: vec![("k".into(), "v".into())],
            ..Default::default()
        };
        assert_eq!(write_csv(&r), format!("{RESULT_HEADER}\n# k = v\n"));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let r = sample();
        let back = parse_csv(&write_csv(&r)).unwrap();
        assert_eq!(back.rows.len(), 2);
        for (a, b) in r.rows.iter().zip(&back.rows) {
            assert_eq!((a.n, a.s, a.scheme, a.rep), (b.n, b.s, b.scheme, b.rep));
            for (x, y) in [
                (a.lambda, b.lambda),
                (a.train_metric, b.train_metric),
                (a.test_metric, b.test_metric),
                (a.excess_risk, b.excess_risk),
                (a.wall_time_ms, b.wall_time_ms),
            ] {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
        assert_eq!(back.summary, r.summary);
        assert_eq!(write_csv(&back), write_csv(&r));
    }

    #[test]
    fn lf_only() {
        assert!(!write_csv(&sample()).contains('\r'));
    }

    #[test]
    fn io_error_names_path() {
        let err = emit_csv(&sample(), "/nonexistent-dir/x/out.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/out.csv"));
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse_csv("a,b\n").is_err());
    }
}
