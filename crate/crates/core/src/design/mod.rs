//! Space-filling and filtered designs over the parameter box.
//!
//! * [`plain_lhs`] / [`maximin_lhs`] — Latin hypercubes, optionally improved
//!   by restarted pairwise-swap hill climbing on the minimum pairwise
//!   distance (computed in `[-1, 1]`-mapped coordinates so axes with
//!   different units are commensurate).
//! * [`sobol_design`] — a low-discrepancy Sobol sequence.
//! * [`uniform_sample`] — i.i.d. uniform Monte Carlo.
//! * [`filtered_design`] — rejection of candidates through a plausibility
//!   predictor; the workhorse of wave-based history matching.
//!
//! Every design is a pure function of its arguments and seed.

mod lhs;
mod sobol;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::space::{ParameterSpace, Point};
use crate::Result;

pub use lhs::{is_latin, maximin_lhs, plain_lhs};
pub use sobol::{sobol_design, sobol_max_dimension};

/// How a design was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    MaximinLhs,
    Sobol,
    UniformRandom,
    Filtered,
}

/// A set of design points plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub points: Vec<Point>,
    pub generator: GeneratorKind,
    pub seed: u64,
    /// Fraction of drawn candidates that were accepted; only set by
    /// [`filtered_design`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
}

/// `n` i.i.d. uniform points on the box, deterministic given the seed.
pub fn uniform_sample(space: &ParameterSpace, n: usize, seed: u64) -> Result<Design> {
    if n == 0 {
        return Err(CoreError::InvalidArgument(
            "uniform_sample needs n >= 1".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| random_point(space, &mut rng)).collect();
    Ok(Design {
        points,
        generator: GeneratorKind::UniformRandom,
        seed,
        acceptance_rate: None,
    })
}

pub(crate) fn random_point<R: Rng>(space: &ParameterSpace, rng: &mut R) -> Point {
    Point::new(
        space
            .params()
            .iter()
            .map(|p| p.lower + rng.random::<f64>() * (p.upper - p.lower))
            .collect(),
    )
}

/// Draws candidates in batches, keeps those the predictor scores at or above
/// `threshold`, and stops at `n_target` accepted points or `max_draws`
/// candidates, whichever comes first.
///
/// The predictor maps a point to a plausibility probability in `[0, 1]`.
/// Batch members are evaluated in parallel but collected in draw order, so
/// the result depends only on the arguments and seed.
///
/// Exhausting `max_draws` with zero acceptances returns
/// [`CoreError::EmptyPlausibleSet`]: the criterion (as seen through the
/// predictor) admits nothing, which callers usually want to surface rather
/// than treat as a generic failure.
pub fn filtered_design<F>(
    space: &ParameterSpace,
    predictor: F,
    threshold: f64,
    n_target: usize,
    batch: usize,
    max_draws: usize,
    seed: u64,
) -> Result<Design>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if n_target == 0 || batch == 0 || max_draws == 0 {
        return Err(CoreError::InvalidArgument(
            "n_target, batch and max_draws must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut accepted = Vec::with_capacity(n_target);
    let mut drawn = 0usize;
    while accepted.len() < n_target && drawn < max_draws {
        let m = batch.min(max_draws - drawn);
        let candidates: Vec<Point> = (0..m).map(|_| random_point(space, &mut rng)).collect();
        let scores: Vec<Result<f64>> = candidates.par_iter().map(|p| predictor(p)).collect();
        for (point, score) in candidates.into_iter().zip(scores) {
            drawn += 1;
            if score? >= threshold {
                accepted.push(point);
                if accepted.len() == n_target {
                    break;
                }
            }
        }
    }
    if accepted.is_empty() {
        return Err(CoreError::EmptyPlausibleSet {
            draws: drawn,
            wave: None,
        });
    }
    let rate = accepted.len() as f64 / drawn as f64;
    Ok(Design {
        points: accepted,
        generator: GeneratorKind::Filtered,
        seed,
        acceptance_rate: Some(rate),
    })
}
