//! The simulator abstraction and batch evaluation.
//!
//! A [`Simulator`] maps a parameter point to a metric vector, or to a
//! failure: expensive geoscience codes crash, diverge and time out as a
//! matter of course, so failures are ordinary data here.

mod external;
mod two_box;

use rayon::prelude::*;

use crate::ensemble::{Ensemble, RunOutcome, RunRecord};
use crate::error::CoreError;
use crate::space::{MetricVector, ParameterSpace, Point};
use crate::Result;

pub use external::ExternalSimulator;
pub use two_box::{two_box_space, TwoBoxConfig, TwoBoxEquilibrium, TwoBoxTransient};

/// Static description of a simulator: its input box and output metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorSpec {
    pub input_space: ParameterSpace,
    pub metric_names: Vec<String>,
    /// Always true for the built-in simulators; kept explicit because the
    /// ABC/history-matching equivalence relies on it.
    pub deterministic: bool,
}

impl SimulatorSpec {
    pub fn new(input_space: ParameterSpace, metric_names: Vec<String>) -> Result<Self> {
        if metric_names.is_empty() {
            return Err(CoreError::InvalidArgument(
                "simulator needs at least one metric".into(),
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
            input_space,
            metric_names,
            deterministic: true,
        })
    }
}

/// Result of one simulator run.
#[derive(Debug, Clone, PartialEq)]
pub enum SimOutcome {
    Completed(MetricVector),
    Failed(String),
}

impl From<SimOutcome> for RunOutcome {
    fn from(o: SimOutcome) -> Self {
        match o {
            SimOutcome::Completed(m) => RunOutcome::Completed(m),
            SimOutcome::Failed(why) => RunOutcome::Failed(why),
        }
    }
}

/// A deterministic map from parameter points to metrics.
///
/// `run` returns `Err` only for contract violations (points outside the
/// declared box, wrong dimension); a simulation that starts and goes wrong
/// is a `Failed` outcome, not an error.
pub trait Simulator: Send + Sync {
    fn spec(&self) -> &SimulatorSpec;
    fn run(&self, point: &Point) -> Result<SimOutcome>;
}

/// Evaluates a batch of points, preserving input order in the output.
/// `workers` caps the parallelism; `None` uses the global thread pool.
pub fn run_batch(
    sim: &dyn Simulator,
    points: &[Point],
    workers: Option<usize>,
) -> Result<Vec<SimOutcome>> {
    let eval = || points.par_iter().map(|p| sim.run(p)).collect();
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| CoreError::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(eval)
        }
        None => eval(),
    }
}

/// Runs the simulator on every point and appends the outcomes to the
/// ensemble under the given wave index.
pub fn run_into_ensemble(
    sim: &dyn Simulator,
    points: &[Point],
    wave: u32,
    workers: Option<usize>,
    ensemble: &mut Ensemble,
) -> Result<()> {
    let outcomes = run_batch(sim, points, workers)?;
    for (point, outcome) in points.iter().zip(outcomes) {
        ensemble.push(RunRecord {
            point: point.clone(),
            outcome: outcome.into(),
            wave,
        })?;
    }
    Ok(())
}

/// A simulator defined by a closure; the workhorse for synthetic test
/// functions and toy problems.
pub struct FnSimulator<F> {
    spec: SimulatorSpec,
    f: F,
}

impl<F> FnSimulator<F>
where
    F: Fn(&Point) -> Result<SimOutcome> + Send + Sync,
{
    pub fn new(spec: SimulatorSpec, f: F) -> Self {
        Self { spec, f }
    }
}

impl<F> Simulator for FnSimulator<F>
where
    F: Fn(&Point) -> Result<SimOutcome> + Send + Sync,
{
    fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    fn run(&self, point: &Point) -> Result<SimOutcome> {
        self.spec.input_space.check_contains(point)?;
        (self.f)(point)
    }
}

/// Identity-style 1-D toy: `f(x) = x` on `[0, 1]`.
pub fn linear_toy() -> FnSimulator<impl Fn(&Point) -> Result<SimOutcome> + Send + Sync> {
    let space = ParameterSpace::from_bounds(&[("x", 0.0, 1.0)]).unwrap();
    let spec = SimulatorSpec::new(space, vec!["y".into()]).unwrap();
    FnSimulator::new(spec, |p: &Point| {
        Ok(SimOutcome::Completed(MetricVector::new(vec![
            p.coords()[0],
        ])?))
    })
}

/// Constant k-dimensional toy returning `value` everywhere.
pub fn constant_toy(
    space: ParameterSpace,
    value: f64,
) -> FnSimulator<impl Fn(&Point) -> Result<SimOutcome> + Send + Sync> {
    let spec = SimulatorSpec::new(space, vec!["y".into()]).unwrap();
    FnSimulator::new(spec, move |_: &Point| {
        Ok(SimOutcome::Completed(MetricVector::new(vec![value])?))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_preserves_order() {
        let sim = linear_toy();
        let points: Vec<Point> = (0..32).map(|i| Point::new(vec![i as f64 / 32.0])).collect();
        let out = run_batch(&sim, &points, Some(4)).unwrap();
        for (p, o) in points.iter().zip(&out) {
            match o {
                SimOutcome::Completed(m) => assert_eq!(m.values()[0], p.coords()[0]),
                _ => panic!("unexpected failure"),
            }
        }
    }

    #[test]
    fn out_of_domain_is_an_error_not_a_failure() {
        let sim = linear_toy();
        assert!(sim.run(&Point::new(vec![2.0])).is_err());
    }
}
