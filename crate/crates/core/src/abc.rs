//! Rejection ABC with a uniform prior over the parameter box.
//!
//! Draw parameters uniformly, run the simulator, accept draws whose output
//! lies within tolerance `epsilon` of the observations under a distance
//! `rho`. With the interval-violation distance and `epsilon = 0` the
//! accepted set is exactly the set of draws whose outputs satisfy the
//! plausibility criterion — rejection ABC and history matching coincide for
//! a deterministic simulator under a uniform prior.

use serde::{Deserialize, Serialize};

use crate::criteria::PlausibilityCriterion;
use crate::design::uniform_sample;
use crate::ensemble::{Ensemble, RunRecord};
use crate::error::CoreError;
use crate::simulate::{run_batch, SimOutcome, Simulator};
use crate::space::{MetricVector, Point};
use crate::Result;

/// Distance between simulated metrics and the observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbcDistance {
    /// Worst violation of a plausibility criterion: 0 inside every interval,
    /// otherwise the largest distance to an interval edge. With
    /// `epsilon = 0` this is the history-matching indicator kernel.
    MaxIntervalViolation(PlausibilityCriterion),
    /// `sqrt(sum_m w_m (y_m - t_m)^2)`.
    WeightedEuclidean { targets: Vec<f64>, weights: Vec<f64> },
}

impl AbcDistance {
    pub fn validate(&self) -> Result<()> {
        match self {
            AbcDistance::MaxIntervalViolation(_) => Ok(()),
            AbcDistance::WeightedEuclidean { targets, weights } => {
                if targets.len() != weights.len() {
                    return Err(CoreError::DimensionMismatch {
                        expected: targets.len(),
                        got: weights.len(),
                    });
                }
                if weights.iter().any(|&w| !(w > 0.0)) {
                    return Err(CoreError::InvalidArgument(
                        "weights must be strictly positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn distance(&self, metrics: &MetricVector) -> Result<f64> {
        match self {
            AbcDistance::MaxIntervalViolation(criterion) => {
                if metrics.len() != criterion.len() {
                    return Err(CoreError::DimensionMismatch {
                        expected: criterion.len(),
                        got: metrics.len(),
                    });
                }
                let mut worst = 0.0f64;
                for (&v, b) in metrics.values().iter().zip(criterion.bounds()) {
                    if !b.is_constrained() {
                        continue;
                    }
                    let below = if b.lower.is_finite() { b.lower - v } else { f64::NEG_INFINITY };
                    let above = if b.upper.is_finite() { v - b.upper } else { f64::NEG_INFINITY };
                    worst = worst.max(below).max(above);
                }
                Ok(worst)
            }
            AbcDistance::WeightedEuclidean { targets, weights } => {
                if metrics.len() != targets.len() {
                    return Err(CoreError::DimensionMismatch {
                        expected: targets.len(),
                        got: metrics.len(),
                    });
                }
                Ok(metrics
                    .values()
                    .iter()
                    .zip(targets)
                    .zip(weights)
                    .map(|((&y, &t), &w)| w * (y - t) * (y - t))
                    .sum::<f64>()
                    .sqrt())
            }
        }
    }
}

/// Either a fixed tolerance or a quantile rule that spends a target fraction
/// of the completed runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceRule {
    /// Accept distances `<= epsilon`; `inf` accepts every completed run.
    Fixed(f64),
    /// Set `epsilon` to the empirical `q`-quantile of completed-run
    /// distances, accepting exactly `ceil(q * completed)` draws (ties broken
    /// by draw order).
    Quantile(f64),
}

impl ToleranceRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ToleranceRule::Fixed(e) => {
                if e.is_nan() || e < 0.0 {
                    return Err(CoreError::InvalidArgument(format!(
                        "fixed tolerance must be >= 0, got {e}"
                    )));
                }
                Ok(())
            }
            ToleranceRule::Quantile(q) => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(CoreError::InvalidArgument(format!(
                        "quantile must lie in (0, 1), got {q}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Rejection-ABC configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcConfig {
    pub distance: AbcDistance,
    pub tolerance: ToleranceRule,
    pub budget: usize,
    pub seed: u64,
}

/// Accepted draws plus the full evaluation record.
#[derive(Debug)]
pub struct AbcResult {
    pub accepted: Vec<Point>,
    pub ensemble: Ensemble,
    pub epsilon_used: f64,
    /// Accepted fraction of the whole budget; failed runs count against it.
    pub acceptance_rate: f64,
    pub failed_runs: usize,
}

/// Uniform-prior rejection sampler over the box.
pub fn rejection_abc(
    sim: &dyn Simulator,
    config: &AbcConfig,
    workers: Option<usize>,
) -> Result<AbcResult> {
    if config.budget == 0 {
        return Err(CoreError::InvalidArgument("budget must be >= 1".into()));
    }
    config.distance.validate()?;
    config.tolerance.validate()?;

    let space = &sim.spec().input_space;
    let draws = uniform_sample(space, config.budget, config.seed)?.points;
    let outcomes = run_batch(sim, &draws, workers)?;

    let mut ensemble = Ensemble::new(sim.spec().metric_names.clone())?;
    let mut completed: Vec<(usize, f64)> = Vec::new(); // (draw index, distance)
    let mut failed = 0usize;
    for (i, (point, outcome)) in draws.iter().zip(&outcomes).enumerate() {
        match outcome {
            SimOutcome::Completed(m) => completed.push((i, config.distance.distance(m)?)),
            SimOutcome::Failed(_) => failed += 1,
        }
        ensemble.push(RunRecord {
            point: point.clone(),
            outcome: outcome.clone().into(),
            wave: 0,
        })?;
    }
    if completed.is_empty() {
        return Err(CoreError::NoCompletedRuns {
            attempted: config.budget,
        });
    }

    let (epsilon_used, accepted_idx): (f64, Vec<usize>) = match config.tolerance {
        ToleranceRule::Fixed(eps) => (
            eps,
            completed
                .iter()
                .filter(|(_, d)| *d <= eps)
                .map(|(i, _)| *i)
                .collect(),
        ),
        ToleranceRule::Quantile(q) => {
            let m = ((q * completed.len() as f64).ceil() as usize).max(1);
            let mut ranked = completed.clone();
            ranked.sort_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            let eps = ranked[m - 1].1;
            let mut idx: Vec<usize> = ranked[..m].iter().map(|(i, _)| *i).collect();
            idx.sort_unstable();
            (eps, idx)
        }
    };

    let accepted: Vec<Point> = accepted_idx.iter().map(|&i| draws[i].clone()).collect();
    let acceptance_rate = accepted.len() as f64 / config.budget as f64;
    Ok(AbcResult {
        accepted,
        ensemble,
        epsilon_used,
        acceptance_rate,
        failed_runs: failed,
    })
}
