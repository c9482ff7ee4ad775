//! Emulators: cheap statistical surrogates of a simulator.
//!
//! Every emulator predicts each metric at a query point as a Gaussian
//! `(mean, variance)`; that is exactly the interface history matching
//! needs to turn predictions into plausibility probabilities. Two families
//! are provided: per-metric Gaussian processes ([`gp`]) and stepwise-selected
//! linear+quadratic regression surfaces ([`regression`]).

pub mod gp;
mod optim;
pub mod regression;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::simulate::{SimOutcome, Simulator};
use crate::space::Point;
use crate::Result;

pub(crate) use optim::nelder_mead;

/// Gaussian prediction for one metric at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrediction {
    pub mean: f64,
    pub variance: f64,
}

/// A fitted surrogate: per-metric Gaussian predictions at any point of the
/// training space.
pub trait Emulator: Send + Sync {
    fn metric_names(&self) -> &[String];

    /// Per-metric posterior mean and variance at `point`.
    fn predict(&self, point: &Point) -> Result<Vec<GaussianPrediction>>;

    /// Some operations (entropy lookahead) need Gaussian-process internals;
    /// emulators that are GPs under the hood say so here.
    fn as_gp(&self) -> Option<&gp::GpModel> {
        None
    }
}

/// Standardization of a target column to zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTransform {
    pub mean: f64,
    pub std: f64,
}

impl TargetTransform {
    /// Fits the transform; constant columns keep `std = 1` so the transform
    /// stays invertible.
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    pub fn standardize(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn unstandardize(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Wraps a cheap simulator as a zero-variance "emulator".
///
/// Predictions are the simulator's own outputs with variance 0, so the
/// plausibility probability degenerates to the exact indicator of the
/// criterion. Useful as ground truth in diagnostics and tests.
pub struct OracleEmulator<S: Simulator> {
    sim: S,
}

impl<S: Simulator> OracleEmulator<S> {
    pub fn new(sim: S) -> Self {
        Self { sim }
    }

    pub fn simulator(&self) -> &S {
        &self.sim
    }
}

impl<S: Simulator> Emulator for OracleEmulator<S> {
    fn metric_names(&self) -> &[String] {
        &self.sim.spec().metric_names
    }

    fn predict(&self, point: &Point) -> Result<Vec<GaussianPrediction>> {
        match self.sim.run(point)? {
            SimOutcome::Completed(m) => Ok(m
                .values()
                .iter()
                .map(|&mean| GaussianPrediction {
                    mean,
                    variance: 0.0,
                })
                .collect()),
            SimOutcome::Failed(why) => Err(CoreError::Numerical(format!(
                "oracle simulator failed: {why}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_round_trips() {
        let values = [1.0, 2.0, 5.0, -3.0, 11.0];
        let t = TargetTransform::fit(&values);
        for &v in &values {
            assert!((t.unstandardize(t.standardize(v)) - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
        let std_vals: Vec<f64> = values.iter().map(|&v| t.standardize(v)).collect();
        let mean: f64 = std_vals.iter().sum::<f64>() / std_vals.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn constant_column_keeps_unit_std() {
        let t = TargetTransform::fit(&[4.0, 4.0, 4.0]);
        assert_eq!(t.std, 1.0);
        assert_eq!(t.standardize(4.0), 0.0);
    }
}
