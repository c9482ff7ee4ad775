//! The design-and-response data: ordered simulator evaluations.
//!
//! An [`Ensemble`] collects `(point, outcome, wave)` records. Outcomes are
//! `Pending` (designed but not yet run), `Completed` with a metric vector,
//! or `Failed` with a reason — failed runs are real data in this domain and
//! are kept, they just never count as plausible and are excluded from
//! emulator fits.
//!
//! The on-disk format is JSON lines, one record per line:
//!
//! ```text
//! {"theta":[1.2,38.0],"status":"completed","metrics":[294.9],"wave":0}
//! {"theta":[1.9,31.0],"status":"failed","reason":"diverged","wave":1}
//! {"theta":[1.4,44.0],"status":"pending","wave":1}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::space::{MetricVector, Point};
use crate::Result;

/// What happened when (or before) a design point was run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    /// Designed but not yet simulated.
    Pending,
    Completed(MetricVector),
    Failed(String),
}

impl RunOutcome {
    pub fn metrics(&self) -> Option<&MetricVector> {
        match self {
            RunOutcome::Completed(m) => Some(m),
            _ => None,
        }
    }
}

/// One ensemble entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub point: Point,
    pub outcome: RunOutcome,
    pub wave: u32,
}

/// Ordered set of simulator evaluations with their design points.
///
/// Invariants enforced on insertion: points are pairwise distinct (exact
/// coordinate equality is rejected), wave indices never decrease, and
/// completed metric vectors match the declared metric names in length.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    metric_names: Vec<String>,
    records: Vec<RunRecord>,
}

impl Ensemble {
    pub fn new(metric_names: Vec<String>) -> Result<Self> {
        if metric_names.is_empty() {
            return Err(CoreError::InvalidArgument(
                "ensemble needs at least one metric name".into(),
            ));
        }
        for i in 1..metric_names.len() {
            if metric_names[..i].contains(&metric_names[i]) {
                return Err(CoreError::InvalidArgument(format!(
                    "duplicate metric name `{}`",
                    metric_names[i]
                )));
            }
        }
        Ok(Self {
            metric_names,
            records: Vec::new(),
        })
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record, enforcing the ensemble invariants.
    pub fn push(&mut self, record: RunRecord) -> Result<()> {
        if let Some(idx) = self
            .records
            .iter()
            .position(|r| r.point.bit_eq(&record.point))
        {
            return Err(CoreError::DuplicatePoint { index: idx });
        }
        if let Some(last) = self.records.last() {
            if record.wave < last.wave {
                return Err(CoreError::InvalidArgument(format!(
                    "wave index decreased: {} after {}",
                    record.wave, last.wave
                )));
            }
        }
        if let RunOutcome::Completed(m) = &record.outcome {
            if m.len() != self.metric_names.len() {
                return Err(CoreError::DimensionMismatch {
                    expected: self.metric_names.len(),
                    got: m.len(),
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Completed records only, in insertion order.
    pub fn completed(&self) -> impl Iterator<Item = (&Point, &MetricVector, u32)> {
        self.records.iter().filter_map(|r| match &r.outcome {
            RunOutcome::Completed(m) => Some((&r.point, m, r.wave)),
            _ => None,
        })
    }

    pub fn completed_count(&self) -> usize {
        self.completed().count()
    }

    /// Pending records with their indices, in insertion order.
    pub fn pending(&self) -> impl Iterator<Item = (usize, &Point, u32)> {
        self.records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match r.outcome {
                RunOutcome::Pending => Some((i, &r.point, r.wave)),
                _ => None,
            })
    }

    /// Replaces the outcome of a pending record after simulation.
    pub fn resolve(&mut self, index: usize, outcome: RunOutcome) -> Result<()> {
        let rec = self
            .records
            .get_mut(index)
            .ok_or_else(|| CoreError::InvalidArgument(format!("no record {index}")))?;
        if rec.outcome != RunOutcome::Pending {
            return Err(CoreError::InvalidArgument(format!(
                "record {index} is not pending"
            )));
        }
        if let RunOutcome::Completed(m) = &outcome {
            if m.len() != self.metric_names.len() {
                return Err(CoreError::DimensionMismatch {
                    expected: self.metric_names.len(),
                    got: m.len(),
                });
            }
        }
        rec.outcome = outcome;
        Ok(())
    }

    /// Writes the JSON-lines form.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            let line = RecordLine::from(r);
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads the JSON-lines form, enforcing the same invariants as `push`.
    pub fn read_jsonl<R: BufRead>(metric_names: Vec<String>, r: R) -> Result<Self> {
        let mut ensemble = Ensemble::new(metric_names)?;
        for (no, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RecordLine = serde_json::from_str(&line).map_err(|e| {
                CoreError::InvalidArgument(format!("ensemble line {}: {e}", no + 1))
            })?;
            ensemble.push(parsed.try_into()?)?;
        }
        Ok(ensemble)
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    theta: Vec<f64>,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metrics: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    wave: u32,
}

impl From<&RunRecord> for RecordLine {
    fn from(r: &RunRecord) -> Self {
        let (status, metrics, reason) = match &r.outcome {
            RunOutcome::Pending => ("pending", None, None),
            RunOutcome::Completed(m) => ("completed", Some(m.values().to_vec()), None),
            RunOutcome::Failed(why) => ("failed", None, Some(why.clone())),
        };
        RecordLine {
            theta: r.point.coords().to_vec(),
            status: status.to_string(),
            metrics,
            reason,
            wave: r.wave,
        }
    }
}

impl TryFrom<RecordLine> for RunRecord {
    type Error = CoreError;
    fn try_from(line: RecordLine) -> Result<Self> {
        let outcome = match line.status.as_str() {
            "pending" => RunOutcome::Pending,
            "completed" => {
                let metrics = line.metrics.ok_or_else(|| {
                    CoreError::InvalidArgument("completed record without metrics".into())
                })?;
                RunOutcome::Completed(MetricVector::new(metrics)?)
            }
            "failed" => RunOutcome::Failed(line.reason.unwrap_or_else(|| "unknown".into())),
            other => {
                return Err(CoreError::InvalidArgument(format!(
                    "unknown record status `{other}`"
                )))
            }
        };
        Ok(RunRecord {
            point: Point::new(line.theta),
            outcome,
            wave: line.wave,
        })
    }
}
