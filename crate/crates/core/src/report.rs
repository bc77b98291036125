//! Report rows with their CSV form, plus churn-phase statistics.

use std::fmt::Write as _;
use std::path::Path;

use crate::connectivity::{kappa_graph, ConnectivityReport, DiGraph};
use crate::error::{GraphError, ReportError};
use crate::snapshot::Snapshot;
use crate::time::SimTime;

pub const CSV_HEADER: &str = "time_min,kappa_min,kappa_avg,resilience,c_used,pairs_computed,n,m,reciprocity";

/// One CSV line. Connectivity fields are empty below two vertices and
/// reciprocity is empty without edges.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub at: SimTime,
    pub kappa_min: Option<u32>,
    pub kappa_avg: Option<f64>,
    pub resilience: Option<i64>,
    pub c_used: f64,
    pub pairs_computed: Option<usize>,
    pub n: usize,
    pub m: usize,
    pub reciprocity: Option<f64>,
}

impl ReportRow {
    pub fn new(at: SimTime, g: &DiGraph, c: f64, report: Option<&ConnectivityReport>) -> ReportRow {
        ReportRow {
            at,
            kappa_min: report.map(|r| r.kappa_min),
            kappa_avg: report.map(|r| r.kappa_avg),
            resilience: report.map(|r| r.resilience),
            c_used: c,
            pairs_computed: report.map(|r| r.pairs_computed),
            n: g.n(),
            m: g.m(),
            reciprocity: g.reciprocity().ok(),
        }
    }

    pub fn to_csv_line(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.at,
            opt(&self.kappa_min),
            opt(&self.kappa_avg),
            opt(&self.resilience),
            self.c_used,
            opt(&self.pairs_computed),
            self.n,
            self.m,
            opt(&self.reciprocity),
        )
    }
}

/// Connectivity analysis of one snapshot with source fraction `c`.
pub fn analyze_snapshot(snap: &Snapshot, c: f64) -> Result<(ReportRow, Option<ConnectivityReport>), GraphError> {
    let g = DiGraph::from_snapshot(snap);
    analyze_graph(&g, snap.at, c)
}

pub fn analyze_graph(g: &DiGraph, at: SimTime, c: f64) -> Result<(ReportRow, Option<ConnectivityReport>), GraphError> {
    let report = match kappa_graph(g, c) {
        Ok(mut r) => {
            r.at = Some(at);
            Some(r)
        }
        Err(GraphError::TooSmall { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok((ReportRow::new(at, g, c, report.as_ref()), report))
}

pub fn rows_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        writeln!(out, "{}", row.to_csv_line()).unwrap();
    }
    out
}

pub fn write_csv(path: &Path, rows: &[ReportRow]) -> Result<(), ReportError> {
    std::fs::write(path, rows_to_csv(rows)).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>, ReportError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
    parse_csv(&text).map_err(|message| ReportError::Format { path: path.to_path_buf(), message })
}

/// Parses report CSV text. Columns are matched by header name.
pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty report")?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| names.iter().position(|n| *n == name).ok_or(format!("missing column `{name}`"));
    let idx = [
        col("time_min")?,
        col("kappa_min")?,
        col("kappa_avg")?,
        col("resilience")?,
        col("c_used")?,
        col("pairs_computed")?,
        col("n")?,
        col("m")?,
        col("reciprocity")?,
    ];
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(format!("line {}: expected {} fields, found {}", i + 1, names.len(), fields.len()));
        }
        let bad = |what: &str, v: &str| format!("line {}: bad {what} `{v}`", i + 1);
        fn opt<T: std::str::FromStr>(v: &str) -> Result<Option<T>, ()> {
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| ())
            }
        }
        let get = |k: usize| fields[idx[k]];
        let minutes: f64 = get(0).parse().map_err(|_| bad("time_min", get(0)))?;
        if !(minutes.is_finite() && minutes >= 0.0) {
            return Err(bad("time_min", get(0)));
        }
        rows.push(ReportRow {
            at: SimTime::from_minutes_f64(minutes),
            kappa_min: opt(get(1)).map_err(|_| bad("kappa_min", get(1)))?,
            kappa_avg: opt(get(2)).map_err(|_| bad("kappa_avg", get(2)))?,
            resilience: opt(get(3)).map_err(|_| bad("resilience", get(3)))?,
            c_used: get(4).parse().map_err(|_| bad("c_used", get(4)))?,
            pairs_computed: opt(get(5)).map_err(|_| bad("pairs_computed", get(5)))?,
            n: get(6).parse().map_err(|_| bad("n", get(6)))?,
            m: get(7).parse().map_err(|_| bad("m", get(7)))?,
            reciprocity: opt(get(8)).map_err(|_| bad("reciprocity", get(8)))?,
        });
    }
    Ok(rows)
}

/// Mean and relative variance of the minimum connectivity during churn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChurnPhaseStats {
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    /// `variance / mean`; `None` when the mean is zero but the variance is not.
    pub relative_variance: Option<f64>,
    pub samples: usize,
}

/// Statistics over samples taken at or after `churn_start`. Sums are exact
/// integers, so the result does not depend on sample order.
pub fn churn_phase_stats(series: &[(SimTime, u32)], churn_start: SimTime) -> Result<ChurnPhaseStats, ReportError> {
    let values: Vec<u32> = series.iter().filter(|(t, _)| *t >= churn_start).map(|&(_, k)| k).collect();
    if values.len() < 2 {
        return Err(ReportError::NotEnoughSamples { needed: 2, found: values.len() });
    }
    let n = values.len() as u128;
    let sum: u128 = values.iter().map(|&v| v as u128).sum();
    let squares: u128 = values.iter().map(|&v| (v as u128) * (v as u128)).sum();
    let mean = sum as f64 / n as f64;
    // n * sum(x^2) - sum(x)^2 >= 0 by Cauchy-Schwarz.
    let variance = (n * squares - sum * sum) as f64 / (n * n) as f64;
    let relative_variance = match (sum, variance) {
        (0, 0.0) => Some(0.0),
        (0, _) => None,
        _ => Some(variance / mean),
    };
    Ok(ChurnPhaseStats { mean, variance, relative_variance, samples: values.len() })
}

/// `(time, kappa_min)` pairs of the rows that have a connectivity value.
pub fn kappa_series(rows: &[ReportRow]) -> Vec<(SimTime, u32)> {
    rows.iter().filter_map(|r| r.kappa_min.map(|k| (r.at, k))).collect()
}

/// Verdict of the inequality `κ(D) > a` for `a` compromised nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resilience {
    pub pass: bool,
    /// `κ(D) - 1`: the number of compromised nodes the network tolerates.
    pub r: i64,
}

pub fn assert_resilience(kappa_min: u32, attackers: u32) -> Resilience {
    Resilience { pass: kappa_min > attackers, r: kappa_min as i64 - 1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(values: &[u32]) -> Vec<(SimTime, u32)> {
        values.iter().enumerate().map(|(i, &v)| (SimTime::from_minutes(120 + i as u64), v)).collect()
    }

    fn start() -> SimTime {
        SimTime::from_minutes(120)
    }

    #[test]
    fn two_and_four() {
        let s = churn_phase_stats(&series(&[2, 4]), start()).unwrap();
        assert_eq!((s.mean, s.variance, s.samples), (3.0, 1.0, 2));
        assert!((s.relative_variance.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_has_zero_rv() {
        let s = churn_phase_stats(&series(&[0, 0, 0, 0]), start()).unwrap();
        assert_eq!((s.mean, s.relative_variance), (0.0, Some(0.0)));
    }

    #[test]
    fn constant_series() {
        let s = churn_phase_stats(&series(&[7, 7, 7]), start()).unwrap();
        assert_eq!((s.mean, s.variance, s.relative_variance), (7.0, 0.0, Some(0.0)));
    }

    #[test]
    fn samples_before_churn_are_ignored() {
        let mut s = vec![(SimTime::from_minutes(60), 100)];
        s.extend(series(&[2, 4]));
        assert_eq!(churn_phase_stats(&s, start()).unwrap().mean, 3.0);
        assert!(matches!(
            churn_phase_stats(&s[..2], start()),
            Err(ReportError::NotEnoughSamples { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn resilience_boundaries() {
        assert_eq!(assert_resilience(20, 19), Resilience { pass: true, r: 19 });
        assert!(!assert_resilience(20, 20).pass);
        assert_eq!(assert_resilience(0, 0), Resilience { pass: false, r: -1 });
    }

    #[test]
    fn csv_round_trip_with_missing_fields() {
        let rows = vec![
            ReportRow {
                at: SimTime::from_minutes_f64(12.5),
                kappa_min: Some(3),
                kappa_avg: Some(4.25),
                resilience: Some(2),
                c_used: 0.02,
                pairs_computed: Some(40),
                n: 10,
                m: 55,
                reciprocity: Some(0.8),
            },
            ReportRow {
                at: SimTime::from_minutes(20),
                kappa_min: None,
                kappa_avg: None,
                resilience: None,
                c_used: 1.0,
                pairs_computed: None,
                n: 1,
                m: 0,
                reciprocity: None,
            },
        ];
        let text = rows_to_csv(&rows);
        assert_eq!(text.lines().nth(1), Some("12.5,3,4.25,2,0.02,40,10,55,0.8"));
        assert_eq!(text.lines().nth(2), Some("20,,,,1,,1,0,"));
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_csv("time_min,kappa_min\n1,2\n").unwrap_err();
        assert!(err.contains("kappa_avg"), "{err}");
    }

    proptest! {
        #[test]
        fn matches_float_formula_and_ignores_order(mut values in proptest::collection::vec(0u32..200, 2..60), seed in any::<u64>()) {
            let s = churn_phase_stats(&series(&values), start()).unwrap();
            let n = values.len() as f64;
            let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
            prop_assert!((s.mean - mean).abs() < 1e-9);
            prop_assert!((s.variance - var).abs() < 1e-9);
            if mean > 0.0 {
                prop_assert!((s.relative_variance.unwrap() - var / mean).abs() < 1e-9);
            }
            use rand::{seq::SliceRandom, SeedableRng};
            values.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(churn_phase_stats(&series(&values), start()).unwrap(), s);
        }
    }
}
