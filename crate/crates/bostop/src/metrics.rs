//! Evaluation metrics for stopping rules: the relative test-error change
//! (RYC) and relative time change (RTC) per run, cross-seed aggregation, and
//! bound-quality diagnostics comparing the regret bound to the true regret.
//!
//! ```text
//! RYC = (y_T - y_es) / max(y_T, y_es)      in [-1, 1]
//! RTC = (t_T - t_es) / t_T                 in [0, 1]
//! ```
//!
//! `y_T`/`t_T` belong to the full-budget solution, `y_es`/`t_es` to the
//! solution at the recorded stop iteration. A criterion that never fires
//! scores exactly 0 on both.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{RunRecord, SyntheticObjective};
use crate::space::Candidate;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("bad times: t_es {t_es} must lie in (0, t_T], t_T {t_t} must be > 0")]
    BadTimes { t_t: f64, t_es: f64 },
    #[error("{0} is not available for this record")]
    NotAvailable(&'static str),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// RYC value plus a flag for the degenerate all-nonpositive case, which is
/// defined as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ryc {
    pub value: f64,
    pub degenerate: bool,
}

/// Relative test-error change between the full-budget and early-stop
/// solutions. Positive means early stopping had the lower error.
pub fn ryc(y_full: f64, y_early: f64) -> Ryc {
    let denom = y_full.max(y_early);
    if denom <= 0.0 {
        return Ryc { value: 0.0, degenerate: true };
    }
    Ryc { value: (y_full - y_early) / denom, degenerate: false }
}

/// Relative time saved by stopping early.
pub fn rtc(t_full: f64, t_early: f64) -> Result<f64, MetricsError> {
    if !(t_full > 0.0) || t_early > t_full || t_early < 0.0 {
        return Err(MetricsError::BadTimes { t_t: t_full, t_es: t_early });
    }
    Ok((t_full - t_early) / t_full)
}

/// Per-run scores, keyed for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub task: String,
    pub criterion: String,
    pub seed: u64,
    pub stop_iteration: Option<usize>,
    /// Error of the full-budget solution (`y_T`).
    pub y_full: f64,
    /// Error of the early-stop solution (`y_es`).
    pub y_early: f64,
    /// Cumulative seconds at the full budget (`t_T`).
    pub t_full: f64,
    /// Cumulative seconds at the stop iteration (`t_es`).
    pub t_early: f64,
    pub ryc: f64,
    pub rtc: f64,
    /// RYC denominator was nonpositive.
    pub ryc_degenerate: bool,
    /// Validation values stood in for missing test metrics.
    pub validation_fallback: bool,
}

/// Index of the incumbent row (argmin of y, earliest on ties) among the
/// first `t` rows.
fn incumbent_row(record: &RunRecord, t: usize) -> Result<usize, MetricsError> {
    if record.rows.is_empty() || t == 0 {
        return Err(MetricsError::MalformedRecord("record has no rows".into()));
    }
    let t = t.min(record.rows.len());
    let mut best = 0;
    for i in 1..t {
        if record.rows[i].y < record.rows[best].y {
            best = i;
        }
    }
    Ok(best)
}

/// Scores one record. `budget` caps the full-budget iteration (defaults to
/// the record length). Test metrics are taken from the incumbent's row when
/// present; otherwise validation values are used and flagged.
pub fn score_record(
    record: &RunRecord,
    run_id: &str,
    task: &str,
    criterion: &str,
    seed: u64,
    budget: Option<usize>,
) -> Result<MetricsRow, MetricsError> {
    let t_budget = budget.unwrap_or(record.rows.len()).min(record.rows.len());
    if t_budget == 0 {
        return Err(MetricsError::MalformedRecord("record has no rows".into()));
    }
    let full_idx = incumbent_row(record, t_budget)?;
    // A stop beyond the budget horizon did not happen within the budget.
    let stop_iteration =
        record.summary.stop_iteration.filter(|&s| s <= t_budget);
    let early_idx = match stop_iteration {
        Some(s) => incumbent_row(record, s)?,
        None => full_idx,
    };

    let metric_of = |idx: usize| -> (f64, bool) {
        match record.rows[idx].test_metric {
            Some(m) => (m, false),
            None => (record.rows[idx].y, true),
        }
    };
    let (y_full, fb1) = metric_of(full_idx);
    let (y_early, fb2) = metric_of(early_idx);
    let t_full = record.rows[t_budget - 1].cum_seconds;
    let t_early = match stop_iteration {
        Some(s) => record.rows[s - 1].cum_seconds,
        None => t_full,
    };
    let r = ryc(y_full, y_early);
    let rtc_value = rtc(t_full, t_early)?;
    Ok(MetricsRow {
        run_id: run_id.to_string(),
        task: task.to_string(),
        criterion: criterion.to_string(),
        seed,
        stop_iteration,
        y_full,
        y_early,
        t_full,
        t_early,
        ryc: r.value,
        rtc: rtc_value,
        ryc_degenerate: r.degenerate,
        validation_fallback: fb1 || fb2,
    })
}

/// Mean/std of RYC and RTC per (task, criterion) group, plus the count of
/// positive-RYC runs (the overfitting indicator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub task: String,
    pub criterion: String,
    pub n_runs: usize,
    pub ryc_mean: f64,
    pub ryc_std: f64,
    pub rtc_mean: f64,
    pub rtc_std: f64,
    pub positive_ryc: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateReport {
    pub groups: Vec<GroupStats>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Groups rows by (task, criterion); groups are sorted by key, so the output
/// is independent of the input order.
pub fn aggregate(rows: &[MetricsRow]) -> AggregateReport {
    let mut keys: Vec<(String, String)> =
        rows.iter().map(|r| (r.task.clone(), r.criterion.clone())).collect();
    keys.sort();
    keys.dedup();
    let groups = keys
        .into_iter()
        .map(|(task, criterion)| {
            let members: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.task == task && r.criterion == criterion)
                .collect();
            let rycs: Vec<f64> = members.iter().map(|r| r.ryc).collect();
            let rtcs: Vec<f64> = members.iter().map(|r| r.rtc).collect();
            let (ryc_mean, ryc_std) = mean_std(&rycs);
            let (rtc_mean, rtc_std) = mean_std(&rtcs);
            GroupStats {
                task,
                criterion,
                n_runs: members.len(),
                ryc_mean,
                ryc_std,
                rtc_mean,
                rtc_std,
                positive_ryc: members.iter().filter(|r| r.ryc > 0.0).count(),
            }
        })
        .collect();
    AggregateReport { groups }
}

/// Per-iteration comparison of the regret bound against the true regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundGapPoint {
    pub t: usize,
    pub r_bar: f64,
    pub true_regret: f64,
    /// `r_bar - true_regret`; negative means the bound failed.
    pub diff: f64,
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundGapSeries {
    pub points: Vec<BoundGapPoint>,
    pub negatives: usize,
    /// 20th/50th/80th percentile of the differences (linear interpolation).
    pub q20: f64,
    pub q50: f64,
    pub q80: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn build_series(points: Vec<BoundGapPoint>) -> Result<BoundGapSeries, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::NotAvailable("bound gap series (no r_bar rows)"));
    }
    let negatives = points.iter().filter(|p| p.negative).count();
    let mut diffs: Vec<f64> = points.iter().map(|p| p.diff).collect();
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(BoundGapSeries {
        negatives,
        q20: quantile(&diffs, 0.2),
        q50: quantile(&diffs, 0.5),
        q80: quantile(&diffs, 0.8),
        points,
    })
}

/// Bound-gap series with the true regret recomputed from the objective by
/// tracking the incumbent through the record's rows.
pub fn bound_gap_series(
    record: &RunRecord,
    objective: &SyntheticObjective,
) -> Result<BoundGapSeries, MetricsError> {
    let space = objective.space();
    let mut incumbent: Option<(f64, Candidate)> = None;
    let mut points = Vec::new();
    for row in &record.rows {
        let external: Vec<f64> = space
            .dims()
            .iter()
            .map(|d| {
                row.candidate
                    .get(&d.name)
                    .copied()
                    .ok_or_else(|| MetricsError::MalformedRecord(format!(
                        "row {} lacks coordinate `{}`",
                        row.t, d.name
                    )))
            })
            .collect::<Result<_, _>>()?;
        let candidate = space
            .to_internal(&external)
            .map_err(|e| MetricsError::MalformedRecord(e.to_string()))?;
        if incumbent.as_ref().is_none_or(|(v, _)| row.y < *v) {
            incumbent = Some((row.y, candidate));
        }
        if let Some(r_bar) = row.r_bar {
            let (_, inc_candidate) = incumbent.as_ref().expect("set above");
            let true_regret = objective.true_regret(inc_candidate);
            let diff = r_bar - true_regret;
            points.push(BoundGapPoint {
                t: row.t,
                r_bar,
                true_regret,
                diff,
                negative: diff < 0.0,
            });
        }
    }
    build_series(points)
}

/// Bound-gap series from the record's stored true-regret column (the form
/// used when only record files are available).
pub fn bound_gap_series_from_record(record: &RunRecord) -> Result<BoundGapSeries, MetricsError> {
    let mut points = Vec::new();
    for row in &record.rows {
        if let Some(r_bar) = row.r_bar {
            let true_regret = row
                .true_regret
                .ok_or(MetricsError::NotAvailable("true regret"))?;
            let diff = r_bar - true_regret;
            points.push(BoundGapPoint {
                t: row.t,
                r_bar,
                true_regret,
                diff,
                negative: diff < 0.0,
            });
        }
    }
    build_series(points)
}

// ---------------------------------------------------------------------------
// CSV emission (17 significant digits for floats)
// ---------------------------------------------------------------------------

pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const METRICS_CSV_HEADER: &[&str] = &[
    "run_id",
    "task",
    "criterion",
    "seed",
    "stop_iteration",
    "y_T",
    "y_es",
    "t_T",
    "t_es",
    "ryc",
    "rtc",
    "ryc_degenerate",
    "validation_fallback",
];

pub fn write_metrics_csv(w: impl Write, rows: &[MetricsRow]) -> Result<(), MetricsError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(METRICS_CSV_HEADER)?;
    for r in rows {
        csv.write_record(&[
            r.run_id.clone(),
            r.task.clone(),
            r.criterion.clone(),
            r.seed.to_string(),
            r.stop_iteration.map(|s| s.to_string()).unwrap_or_default(),
            fmt_g17(r.y_full),
            fmt_g17(r.y_early),
            fmt_g17(r.t_full),
            fmt_g17(r.t_early),
            fmt_g17(r.ryc),
            fmt_g17(r.rtc),
            r.ryc_degenerate.to_string(),
            r.validation_fallback.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub const AGGREGATE_CSV_HEADER: &[&str] = &[
    "task",
    "criterion",
    "n_runs",
    "ryc_mean",
    "ryc_std",
    "rtc_mean",
    "rtc_std",
    "positive_ryc",
];

pub fn write_aggregate_csv(w: impl Write, report: &AggregateReport) -> Result<(), MetricsError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(AGGREGATE_CSV_HEADER)?;
    for g in &report.groups {
        csv.write_record(&[
            g.task.clone(),
            g.criterion.clone(),
            g.n_runs.to_string(),
            fmt_g17(g.ryc_mean),
            fmt_g17(g.ryc_std),
            fmt_g17(g.rtc_mean),
            fmt_g17(g.rtc_std),
            g.positive_ryc.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub const BOUND_GAP_CSV_HEADER: &[&str] =
    &["run_id", "t", "r_bar", "true_regret", "diff", "negative"];

pub fn write_bound_gap_csv(
    w: impl Write,
    series: &[(String, BoundGapSeries)],
) -> Result<(), MetricsError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(BOUND_GAP_CSV_HEADER)?;
    for (run_id, s) in series {
        for p in &s.points {
            csv.write_record(&[
                run_id.clone(),
                p.t.to_string(),
                fmt_g17(p.r_bar),
                fmt_g17(p.true_regret),
                fmt_g17(p.diff),
                p.negative.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub const BOUND_SUMMARY_CSV_HEADER: &[&str] =
    &["run_id", "iterations", "negatives", "diff_q20", "diff_q50", "diff_q80"];

pub fn write_bound_summary_csv(
    w: impl Write,
    series: &[(String, BoundGapSeries)],
) -> Result<(), MetricsError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(BOUND_SUMMARY_CSV_HEADER)?;
    for (run_id, s) in series {
        csv.write_record(&[
            run_id.clone(),
            s.points.len().to_string(),
            s.negatives.to_string(),
            fmt_g17(s.q20),
            fmt_g17(s.q50),
            fmt_g17(s.q80),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
