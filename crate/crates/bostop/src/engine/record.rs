//! Run bookkeeping: the observation log the GPs are fit on, per-iteration
//! rows, and the line-delimited record format written to disk.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::space::Candidate;

use super::EngineError;

/// One evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// 1-based iteration at which the point was evaluated.
    pub iteration: usize,
    /// Internal coordinates; absent only for replayed traces without
    /// candidate information.
    pub candidate: Option<Candidate>,
    /// Objective value (validation metric, minimized).
    pub y: f64,
    /// Per-fold metrics when the evaluation used cross-validation.
    pub fold_values: Option<Vec<f64>>,
    /// Reported evaluation cost in seconds.
    pub eval_seconds: f64,
}

/// Ordered set of evaluations `G_t` with values `y_{1:t}`.
///
/// Engine-built logs have contiguous iterations `1..=t`; filtered views keep
/// their original iteration labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationLog {
    records: Vec<Observation>,
}

impl ObservationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<Observation>) -> Result<Self, EngineError> {
        for obs in &records {
            if !obs.y.is_finite() {
                return Err(EngineError::BadInput(format!(
                    "observation at iteration {} has non-finite y",
                    obs.iteration
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn push(&mut self, obs: Observation) -> Result<(), EngineError> {
        if !obs.y.is_finite() {
            return Err(EngineError::BadInput("non-finite objective value".into()));
        }
        if obs.iteration != self.records.len() + 1 {
            return Err(EngineError::BadInput(format!(
                "iteration {} breaks log contiguity (expected {})",
                obs.iteration,
                self.records.len() + 1
            )));
        }
        self.records.push(obs);
        Ok(())
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    /// Candidates of all observations, or `None` if any observation lacks one.
    pub fn candidates(&self) -> Option<Vec<Candidate>> {
        self.records.iter().map(|r| r.candidate.clone()).collect()
    }
}

/// One row of a persisted run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub t: usize,
    /// External (name -> value) coordinates of the evaluated point; empty for
    /// traces without candidates.
    pub candidate: BTreeMap<String, f64>,
    pub y: f64,
    pub incumbent_value: f64,
    pub r_bar: Option<f64>,
    pub beta_t: Option<f64>,
    pub stop_statistic: Option<f64>,
    pub stop_threshold: Option<f64>,
    /// True on the row where the criterion first fired.
    pub stopped: bool,
    /// Cumulative reported evaluation seconds (not wall clock).
    pub cum_seconds: f64,
    /// Regret of the current incumbent against the registered optimum;
    /// synthetic objectives only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_regret: Option<f64>,
    /// Test metric of the evaluated point, when the objective reports one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalIncumbent {
    pub candidate: BTreeMap<String, f64>,
    pub value: f64,
    pub iteration_found: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// First iteration at which the criterion fired, if it ever did.
    pub stop_iteration: Option<usize>,
    pub final_incumbent: Option<FinalIncumbent>,
    /// `stopped:<criterion>`, `budget_exhausted`, or a failure description.
    pub reason: String,
}

/// Full record of one run: per-iteration rows plus a terminal summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<IterationRow>,
    pub summary: RunSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RecordLine {
    Row(IterationRow),
    Summary(RunSummary),
}

impl RunRecord {
    /// Writes the record as line-delimited JSON: one row per line, summary last.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for row in &self.rows {
            serde_json::to_writer(&mut w, &RecordLine::Row(row.clone()))?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &RecordLine::Summary(self.summary.clone()))?;
        w.write_all(b"\n")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, EngineError> {
        let mut rows = Vec::new();
        let mut summary = None;
        for line in r.lines() {
            let line = line.map_err(|e| EngineError::BadInput(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)
                .map_err(|e| EngineError::BadInput(format!("bad record line: {e}")))?
            {
                RecordLine::Row(row) => rows.push(row),
                RecordLine::Summary(s) => summary = Some(s),
            }
        }
        Ok(Self {
            rows,
            summary: summary
                .ok_or_else(|| EngineError::BadInput("record has no summary line".into()))?,
        })
    }
}

/// One line of an ingested optimizer trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Validation metric (minimized).
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_metric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_metrics: Option<Vec<f64>>,
    pub eval_seconds: f64,
    /// External (name -> value) coordinates, when the trace has them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<BTreeMap<String, f64>>,
}

pub fn read_trace(r: impl BufRead) -> Result<Vec<TraceRow>, EngineError> {
    let mut rows = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| EngineError::BadInput(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line)
                .map_err(|e| EngineError::BadInput(format!("bad trace line: {e}")))?,
        );
    }
    Ok(rows)
}

pub fn write_trace(mut w: impl Write, rows: &[TraceRow]) -> std::io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
