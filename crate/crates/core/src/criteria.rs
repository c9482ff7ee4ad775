//! Plausibility criteria: per-metric acceptance intervals.
//!
//! A [`PlausibilityCriterion`] is the set of simulated outputs considered an
//! acceptable match to observations: one closed interval `[lower, upper]`
//! per metric, where either end may be infinite. A metric whose bounds are
//! both infinite is carried for reporting but does not constrain.
//!
//! A [`WaveSchedule`] is an ordered list of criteria that only ever tighten;
//! it drives the sequential history-matching loop.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::space::MetricVector;
use crate::Result;

/// Closed acceptance interval for a single metric. `-inf`/`+inf` mean
/// unconstrained on that side; serialized as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBound", into = "RawBound")]
pub struct MetricBound {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBound {
    lower: Option<f64>,
    upper: Option<f64>,
}

impl TryFrom<RawBound> for MetricBound {
    type Error = CoreError;
    fn try_from(raw: RawBound) -> Result<Self> {
        MetricBound::new(
            raw.lower.unwrap_or(f64::NEG_INFINITY),
            raw.upper.unwrap_or(f64::INFINITY),
        )
    }
}

impl From<MetricBound> for RawBound {
    fn from(b: MetricBound) -> Self {
        RawBound {
            lower: b.lower.is_finite().then_some(b.lower),
            upper: b.upper.is_finite().then_some(b.upper),
        }
    }
}

impl MetricBound {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() {
            return Err(CoreError::InvalidArgument("interval bound is NaN".into()));
        }
        let constrained = lower.is_finite() || upper.is_finite();
        if constrained && !(lower < upper) {
            return Err(CoreError::InvalidArgument(format!(
                "interval needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Unconstrained on both sides.
    pub fn free() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper)
    }

    pub fn is_constrained(&self) -> bool {
        self.lower.is_finite() || self.upper.is_finite()
    }

    /// Closed-interval membership.
    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }

    /// True when `self` admits every value `other` admits.
    pub fn contains_bound(&self, other: &MetricBound) -> bool {
        self.lower <= other.lower && self.upper >= other.upper
    }
}

/// Per-metric acceptance intervals defining the plausible output set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCriterion", into = "RawCriterion")]
pub struct PlausibilityCriterion {
    bounds: Vec<MetricBound>,
}

#[derive(Serialize, Deserialize)]
struct RawCriterion {
    intervals: Vec<MetricBound>,
}

impl TryFrom<RawCriterion> for PlausibilityCriterion {
    type Error = CoreError;
    fn try_from(raw: RawCriterion) -> Result<Self> {
        PlausibilityCriterion::new(raw.intervals)
    }
}

impl From<PlausibilityCriterion> for RawCriterion {
    fn from(c: PlausibilityCriterion) -> Self {
        RawCriterion { intervals: c.bounds }
    }
}

impl PlausibilityCriterion {
    /// At least one metric must be constrained.
    pub fn new(bounds: Vec<MetricBound>) -> Result<Self> {
        if !bounds.iter().any(MetricBound::is_constrained) {
            return Err(CoreError::InvalidArgument(
                "criterion constrains no metric".into(),
            ));
        }
        Ok(Self { bounds })
    }

    /// Single-metric criterion `[lower, upper]`.
    pub fn single(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![MetricBound::new(lower, upper)?])
    }

    pub fn bounds(&self) -> &[MetricBound] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// True when `self` is metric-wise at least as permissive as `other`.
    pub fn contains_criterion(&self, other: &PlausibilityCriterion) -> bool {
        self.bounds.len() == other.bounds.len()
            && self
                .bounds
                .iter()
                .zip(&other.bounds)
                .all(|(a, b)| a.contains_bound(b))
    }
}

/// True iff every constrained metric lies inside its closed interval.
pub fn is_plausible(metrics: &MetricVector, criterion: &PlausibilityCriterion) -> Result<bool> {
    if metrics.len() != criterion.len() {
        return Err(CoreError::DimensionMismatch {
            expected: criterion.len(),
            got: metrics.len(),
        });
    }
    Ok(metrics
        .values()
        .iter()
        .zip(criterion.bounds())
        .all(|(&v, b)| b.contains(v)))
}

/// An ordered list of criteria, each a metric-wise subset of (or equal to)
/// its predecessor: criteria only ever tighten across waves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct WaveSchedule {
    criteria: Vec<PlausibilityCriterion>,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    criteria: Vec<PlausibilityCriterion>,
}

impl TryFrom<RawSchedule> for WaveSchedule {
    type Error = CoreError;
    fn try_from(raw: RawSchedule) -> Result<Self> {
        WaveSchedule::new(raw.criteria)
    }
}

impl From<WaveSchedule> for RawSchedule {
    fn from(s: WaveSchedule) -> Self {
        RawSchedule { criteria: s.criteria }
    }
}

impl WaveSchedule {
    pub fn new(criteria: Vec<PlausibilityCriterion>) -> Result<Self> {
        if criteria.is_empty() {
            return Err(CoreError::InvalidArgument("empty wave schedule".into()));
        }
        for w in 1..criteria.len() {
            if !criteria[w - 1].contains_criterion(&criteria[w]) {
                return Err(CoreError::InvalidArgument(format!(
                    "wave {w} criterion is not a subset of wave {} criterion",
                    w - 1
                )));
            }
        }
        Ok(Self { criteria })
    }

    pub fn criteria(&self) -> &[PlausibilityCriterion] {
        &self.criteria
    }

    pub fn len(&self) -> usize {
        self.criteria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.criteria.is_empty()
    }
}
