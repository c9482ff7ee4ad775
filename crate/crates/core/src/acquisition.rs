//! Entropy of the plausibility surface and expected-entropy acquisition.
//!
//! The binary entropy of `p(theta)` measures how undecided the emulator is
//! about membership of the plausible set at `theta`; its average over a
//! fixed reference sample,
//!
//! ```text
//! Hbar = mean_r [ -p log p - (1-p) log(1-p) ](theta_r)
//! ```
//!
//! is the remaining uncertainty about the plausible region as a whole.
//! Candidates for the next simulator run are scored by the expected value
//! of `Hbar` after conditioning the Gaussian-process emulator on a
//! hypothetical observation at the candidate (hyperparameters held fixed),
//! and the next run goes wherever that expectation is smallest. Batch
//! selection repeats the argmin greedily, standing in the predictive mean
//! for the unseen observation between picks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::uniform_sample;
use crate::emulator::Emulator as _;
use crate::error::CoreError;
use crate::history::PlausibilityField;
use crate::space::{ParameterSpace, Point};
use crate::stats::phi_inv;
use crate::Result;

/// Binary entropy in nats, with `0 log 0 = 0`.
pub fn entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CoreError::InvalidArgument(format!(
            "entropy argument {p} outside [0, 1]"
        )));
    }
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).ln();
    }
    Ok(h)
}

/// Average entropy of a field over a reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Mean of the per-point entropies.
    pub hbar: f64,
    /// Entropy at each reference point, in reference order.
    pub per_point: Vec<f64>,
}

/// Uniform reference sample used to approximate the entropy integral; frozen
/// per run so the estimate is comparable across design iterations.
pub fn reference_sample(space: &ParameterSpace, n: usize, seed: u64) -> Result<Vec<Point>> {
    Ok(uniform_sample(space, n, seed)?.points)
}

/// `Hbar` of the field's plausibility surface over the reference points.
pub fn mean_entropy(field: &PlausibilityField, reference: &[Point]) -> Result<EntropyEstimate> {
    if reference.is_empty() {
        return Err(CoreError::InvalidArgument(
            "mean_entropy needs a nonempty reference set".into(),
        ));
    }
    let per_point: Vec<f64> = reference
        .iter()
        .map(|p| entropy(field.plaus_prob(p)?))
        .collect::<Result<_>>()?;
    let hbar = per_point.iter().sum::<f64>() / per_point.len() as f64;
    Ok(EntropyEstimate { hbar, per_point })
}

/// Standard normal draws for the hypothetical observation at the candidate,
/// one row per Monte Carlo draw and one column per metric.
///
/// Draws are stratified: each metric gets the `M` quantile midpoints
/// `Phi^-1((k + u)/M)` in a seeded random order with a seeded random offset
/// `u`, so the sample is unbiased, metrics are decorrelated, and the
/// estimator noise falls far below plain i.i.d. sampling.
fn stratified_draws(mc_draws: usize, metrics: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(metrics);
    for _ in 0..metrics {
        let offset: f64 = rng.random::<f64>();
        let mut order: Vec<usize> = (0..mc_draws).collect();
        order.shuffle(&mut rng);
        columns.push(
            order
                .into_iter()
                .map(|k| phi_inv((k as f64 + offset) / mc_draws as f64))
                .collect(),
        );
    }
    (0..mc_draws)
        .map(|j| columns.iter().map(|c| c[j]).collect())
        .collect()
}

/// Expected average entropy after adding a simulator evaluation at
/// `candidate`, estimated over `mc_draws` hypothetical observations from the
/// emulator's predictive distribution. Hyperparameters stay fixed inside the
/// expectation. Only Gaussian-process fields support this.
pub fn expected_entropy_if_added(
    field: &PlausibilityField,
    candidate: &Point,
    reference: &[Point],
    mc_draws: usize,
    seed: u64,
) -> Result<f64> {
    if reference.is_empty() || mc_draws == 0 {
        return Err(CoreError::InvalidArgument(
            "need a nonempty reference set and mc_draws >= 1".into(),
        ));
    }
    let gp = field
        .emulator()
        .as_gp()
        .ok_or_else(|| CoreError::UnsupportedEmulator(
            "expected-entropy lookahead needs a Gaussian-process emulator".into(),
        ))?;
    let look = gp.lookahead(candidate, reference)?;
    let draws = stratified_draws(mc_draws, look.metric_count(), seed);
    let r_len = reference.len();
    let mut total = 0.0;
    for z in &draws {
        let mut sum = 0.0;
        for r in 0..r_len {
            let p = field.prob_from_mean_var(look.prediction_at(r, z));
            sum += entropy(p)?;
        }
        total += sum / r_len as f64;
    }
    Ok(total / draws.len() as f64)
}

/// A greedy batch of design points with the expected-`Hbar` trace recorded
/// after each pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSelection {
    pub points: Vec<Point>,
    /// Expected average entropy after each successive pick; length `d`.
    pub expected_hbar: Vec<f64>,
}

/// Picks `d` points from `candidates` by repeated expected-entropy argmin.
///
/// Between picks the emulator is conditioned on its own predictive mean at
/// the chosen point, a stand-in for the real observation that arrives only
/// when the simulator runs. Candidate scores within a round share the seed,
/// and ties resolve to the lowest candidate index.
pub fn select_batch(
    field: &PlausibilityField,
    candidates: &[Point],
    d: usize,
    reference: &[Point],
    mc_draws: usize,
    seed: u64,
) -> Result<BatchSelection> {
    if d == 0 {
        return Err(CoreError::InvalidArgument("batch size d must be >= 1".into()));
    }
    let mut distinct: Vec<usize> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        if !distinct.iter().any(|&j| candidates[j].bit_eq(c)) {
            distinct.push(i);
        }
    }
    if distinct.len() < d {
        return Err(CoreError::InvalidArgument(format!(
            "need at least {d} distinct candidates, have {}",
            distinct.len()
        )));
    }
    let base = field
        .emulator()
        .as_gp()
        .ok_or_else(|| CoreError::UnsupportedEmulator(
            "batch selection needs a Gaussian-process emulator".into(),
        ))?;
    let (p_low, p_high) = field.thresholds();

    let mut current = base.clone();
    let mut remaining = distinct;
    let mut points = Vec::with_capacity(d);
    let mut trace = Vec::with_capacity(d);
    for round in 0..d {
        let round_field = PlausibilityField::new(&current, field.criterion().clone())?
            .with_thresholds(p_low, p_high)?
            .with_combine(field.combine());
        let scores: Vec<(usize, f64)> = remaining
            .par_iter()
            .map(|&i| {
                expected_entropy_if_added(
                    &round_field,
                    &candidates[i],
                    reference,
                    mc_draws,
                    seed.wrapping_add(round as u64),
                )
                .map(|h| (i, h))
            })
            .collect::<Result<_>>()?;
        let &(pick, value) = scores
            .iter()
            .min_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            })
            .expect("remaining is nonempty");
        let chosen = candidates[pick].clone();
        let means: Vec<f64> = current
            .predict(&chosen)?
            .iter()
            .map(|pr| pr.mean)
            .collect();
        current = current.with_observation(&chosen, &means)?;
        remaining.retain(|&i| i != pick);
        points.push(chosen);
        trace.push(value);
    }
    Ok(BatchSelection {
        points,
        expected_hbar: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use crate::criteria::PlausibilityCriterion;
    use crate::emulator::gp::{gp_fit, GpHyperparams, GpModel};
    use crate::emulator::{Emulator, OracleEmulator};
    use crate::ensemble::{Ensemble, RunOutcome, RunRecord};
    use crate::simulate::{SimOutcome, Simulator, TwoBoxEquilibrium};
    use crate::space::{MetricVector, ParameterSpace};

    #[test]
    fn entropy_basics() {
        assert!((entropy(0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(entropy(0.0).unwrap(), 0.0);
        assert_eq!(entropy(1.0).unwrap(), 0.0);
        // -0.25 ln 0.25 - 0.75 ln 0.75
        assert!((entropy(0.25).unwrap() - 0.562_335_144_618_652_2).abs() < 1e-12);
        assert!(entropy(-0.1).is_err());
        assert!(entropy(1.1).is_err());
    }

    #[test]
    fn entropy_is_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let p: f64 = rng.random();
            let a = entropy(p).unwrap();
            let b = entropy(1.0 - p).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn two_box_fit(n: usize, seed: u64) -> (GpModel, ParameterSpace) {
        let sim = TwoBoxEquilibrium::default();
        let space = sim.spec().input_space.clone();
        let design = crate::design::maximin_lhs(&space, n, seed, 4).unwrap();
        let mut ens = Ensemble::new(vec!["T_surface".into()]).unwrap();
        for p in &design.points {
            if let SimOutcome::Completed(m) = sim.run(p).unwrap() {
                ens.push(RunRecord {
                    point: p.clone(),
                    outcome: RunOutcome::Completed(m),
                    wave: 0,
                })
                .unwrap();
            }
        }
        (gp_fit(&ens, &space, 6, seed).unwrap(), space)
    }

    #[test]
    fn oracle_field_has_zero_mean_entropy() {
        let sim = TwoBoxEquilibrium::default();
        let space = sim.spec().input_space.clone();
        let oracle = OracleEmulator::new(sim);
        let field = PlausibilityField::new(
            &oracle,
            PlausibilityCriterion::single(294.5, 295.5).unwrap(),
        )
        .unwrap();
        let reference = reference_sample(&space, 256, 1).unwrap();
        let est = mean_entropy(&field, &reference).unwrap();
        assert_eq!(est.hbar, 0.0);
        assert!(est.per_point.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn prior_reverting_field_has_constant_entropy() {
        // a GP with tiny lengthscales reverts to its prior away from the two
        // training points, so p is constant on a reference grid that avoids
        // them and Hbar = entropy(c).
        let space = ParameterSpace::from_bounds(&[("x", 0.0, 1.0)]).unwrap();
        let mut ens = Ensemble::new(vec!["y".into()]).unwrap();
        for (x, y) in [(0.0, -1.0), (1.0, 1.0)] {
            ens.push(RunRecord {
                point: Point::new(vec![x]),
                outcome: RunOutcome::Completed(MetricVector::new(vec![y]).unwrap()),
                wave: 0,
            })
            .unwrap();
        }
        let hp = GpHyperparams {
            lengthscales: vec![0.001],
            signal_variance: 1.0,
            nugget: 1e-8,
        };
        let model = GpModel::with_hyperparams(&ens, &space, vec![hp]).unwrap();
        let field =
            PlausibilityField::new(&model, PlausibilityCriterion::single(0.0, 2.0).unwrap())
                .unwrap();
        // symmetric interior grid, far from both training points
        let reference: Vec<Point> = (1..100)
            .map(|i| Point::new(vec![i as f64 / 100.0]))
            .collect();
        let c = field.plaus_prob(&Point::new(vec![0.5])).unwrap();
        let est = mean_entropy(&field, &reference).unwrap();
        assert!(
            (est.hbar - entropy(c).unwrap()).abs() < 1e-6,
            "hbar {} vs entropy(c) {}",
            est.hbar,
            entropy(c).unwrap()
        );
    }

    #[test]
    fn more_data_means_less_entropy_on_nested_designs() {
        let (gp10, space) = two_box_fit(10, 3);
        let sim = TwoBoxEquilibrium::default();
        // extend the same ten points to thirty
        let extra = crate::design::uniform_sample(&space, 20, 99).unwrap();
        let mut gp30 = gp10.clone();
        for p in &extra.points {
            if let SimOutcome::Completed(m) = sim.run(p).unwrap() {
                gp30 = gp30.with_observation(p, m.values()).unwrap();
            }
        }
        let crit = PlausibilityCriterion::single(294.5, 295.5).unwrap();
        let reference = reference_sample(&space, 512, 7).unwrap();
        let f10 = PlausibilityField::new(&gp10, crit.clone()).unwrap();
        let f30 = PlausibilityField::new(&gp30, crit).unwrap();
        let h10 = mean_entropy(&f10, &reference).unwrap().hbar;
        let h30 = mean_entropy(&f30, &reference).unwrap().hbar;
        assert!(h30 < h10, "h30 {h30} >= h10 {h10}");
    }

    #[test]
    fn duplicate_candidate_changes_nothing() {
        let (gp, space) = two_box_fit(10, 5);
        let crit = PlausibilityCriterion::single(294.5, 295.5).unwrap();
        let field = PlausibilityField::new(&gp, crit).unwrap();
        let reference = reference_sample(&space, 256, 11).unwrap();
        let h_now = mean_entropy(&field, &reference).unwrap().hbar;
        // candidate exactly at a training input: nugget-scale variance only
        let training = crate::design::maximin_lhs(&space, 10, 5, 4).unwrap();
        let cand = training.points[3].clone();
        let h_exp = expected_entropy_if_added(&field, &cand, &reference, 128, 17).unwrap();
        assert!(
            (h_exp - h_now).abs() <= 1e-3,
            "expected {h_exp} vs current {h_now}"
        );
    }

    #[test]
    fn information_never_hurts_in_expectation() {
        let (gp, space) = two_box_fit(8, 21);
        let crit = PlausibilityCriterion::single(294.5, 295.5).unwrap();
        let field = PlausibilityField::new(&gp, crit).unwrap();
        let reference = reference_sample(&space, 256, 13).unwrap();
        let h_now = mean_entropy(&field, &reference).unwrap().hbar;
        let candidates = reference_sample(&space, 50, 29).unwrap();
        for cand in &candidates {
            let h_exp = expected_entropy_if_added(&field, cand, &reference, 512, 31).unwrap();
            assert!(
                h_exp <= h_now + 1e-6,
                "candidate {:?}: expected {h_exp} > current {h_now}",
                cand
            );
        }
    }

    #[test]
    fn non_gp_emulator_is_rejected() {
        let sim = TwoBoxEquilibrium::default();
        let space = sim.spec().input_space.clone();
        let oracle = OracleEmulator::new(sim);
        let field = PlausibilityField::new(
            &oracle,
            PlausibilityCriterion::single(294.5, 295.5).unwrap(),
        )
        .unwrap();
        let reference = reference_sample(&space, 16, 1).unwrap();
        let cand = reference[0].clone();
        assert!(matches!(
            expected_entropy_if_added(&field, &cand, &reference, 16, 0),
            Err(CoreError::UnsupportedEmulator(_))
        ));
    }

    /// 1-D toy with two uncertain subregions: f(x) = x on [0, 1], criterion
    /// [0.3, 0.7], GP trained at {0.05, 0.5, 0.95} so the boundary regions
    /// near 0.3 and 0.7 are where p is undecided.
    fn two_region_toy() -> (GpModel, ParameterSpace, PlausibilityCriterion) {
        let space = ParameterSpace::from_bounds(&[("x", 0.0, 1.0)]).unwrap();
        let mut ens = Ensemble::new(vec!["y".into()]).unwrap();
        for x in [0.05, 0.5, 0.95] {
            ens.push(RunRecord {
                point: Point::new(vec![x]),
                outcome: RunOutcome::Completed(MetricVector::new(vec![x]).unwrap()),
                wave: 0,
            })
            .unwrap();
        }
        let hp = GpHyperparams {
            lengthscales: vec![0.4],
            signal_variance: 1.0,
            nugget: 1e-8,
        };
        let model = GpModel::with_hyperparams(&ens, &space, vec![hp]).unwrap();
        let crit = PlausibilityCriterion::single(0.3, 0.7).unwrap();
        (model, space, crit)
    }

    #[test]
    fn argmin_candidate_lies_in_an_uncertain_region() {
        let (model, _space, crit) = two_region_toy();
        let field = PlausibilityField::new(&model, crit).unwrap();
        let scan: Vec<Point> = (0..=100)
            .map(|i| Point::new(vec![i as f64 / 100.0]))
            .collect();
        let reference = scan.clone();
        let mut best = (f64::INFINITY, 0usize);
        for (i, cand) in scan.iter().enumerate() {
            let h = expected_entropy_if_added(&field, cand, &reference, 64, 3).unwrap();
            if h < best.0 {
                best = (h, i);
            }
        }
        let x = scan[best.1].coords()[0];
        let p = field.plaus_prob(&scan[best.1]).unwrap();
        assert!(
            p > 0.05 && p < 0.95,
            "argmin at x = {x} has p = {p}, not uncertain"
        );
    }

    #[test]
    fn batch_of_two_splits_across_uncertain_regions() {
        let (model, _space, crit) = two_region_toy();
        let field = PlausibilityField::new(&model, crit).unwrap();
        let scan: Vec<Point> = (0..=100)
            .map(|i| Point::new(vec![i as f64 / 100.0]))
            .collect();
        // the two uncertain regions found by brute-force scan of p
        let uncertain: Vec<f64> = scan
            .iter()
            .filter(|p| {
                let v = field.plaus_prob(p).unwrap();
                v > 0.05 && v < 0.95
            })
            .map(|p| p.coords()[0])
            .collect();
        let split = 0.5; // the regions straddle the criterion boundaries 0.3 / 0.7
        assert!(uncertain.iter().any(|&x| x < split) && uncertain.iter().any(|&x| x > split));

        let sel = select_batch(&field, &scan, 2, &scan, 64, 5).unwrap();
        let a = sel.points[0].coords()[0];
        let b = sel.points[1].coords()[0];
        assert!(
            (a < split) != (b < split),
            "both picks on one side: {a}, {b}"
        );
        assert_eq!(sel.expected_hbar.len(), 2);
    }

    #[test]
    fn d1_reduces_to_plain_argmin() {
        let (model, _space, crit) = two_region_toy();
        let field = PlausibilityField::new(&model, crit).unwrap();
        let scan: Vec<Point> = (0..=50)
            .map(|i| Point::new(vec![i as f64 / 50.0]))
            .collect();
        let sel = select_batch(&field, &scan, 1, &scan, 64, 9).unwrap();
        let mut best = (f64::INFINITY, 0usize);
        for (i, cand) in scan.iter().enumerate() {
            let h = expected_entropy_if_added(&field, cand, &scan, 64, 9).unwrap();
            if h < best.0 {
                best = (h, i);
            }
        }
        assert!(sel.points[0].bit_eq(&scan[best.1]));
        assert!((sel.expected_hbar[0] - best.0).abs() < 1e-12);
    }

    #[test]
    fn batch_needs_enough_distinct_candidates() {
        let (model, _space, crit) = two_region_toy();
        let field = PlausibilityField::new(&model, crit).unwrap();
        let p = Point::new(vec![0.4]);
        let candidates = vec![p.clone(), p.clone(), Point::new(vec![0.6])];
        let reference = vec![Point::new(vec![0.3]), Point::new(vec![0.7])];
        assert!(select_batch(&field, &candidates, 3, &reference, 16, 0).is_err());
        assert!(select_batch(&field, &candidates, 2, &reference, 16, 0).is_ok());
    }
}
