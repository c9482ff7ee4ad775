//! The plausibility-probability surface and implausibility classification.
//!
//! Given an emulator whose prediction at `theta` is Gaussian per metric and
//! a criterion `[D-, D+]` per metric, the probability that the true output
//! satisfies the criterion is
//!
//! ```text
//! p_m(theta) = Phi((D+ - mu_m)/sigma_m) - Phi((D- - mu_m)/sigma_m)
//! ```
//!
//! combined across metrics by the product rule (independent emulators) or,
//! optionally, by the minimum. Points with `p` below `p_low` are ruled out,
//! above `p_high` ruled in; everything between is uncertain — and the
//! uncertain band is precisely where sequential designs spend simulator
//! budget. Ruling out is deliberately asymmetric: an incorrectly ruled-out
//! region can never be revisited, so both thresholds are strict and the
//! defaults conservative.

use serde::{Deserialize, Serialize};

use crate::criteria::PlausibilityCriterion;
use crate::emulator::{Emulator, GaussianPrediction};
use crate::error::CoreError;
use crate::space::Point;
use crate::stats::phi;
use crate::Result;

/// How per-metric probabilities combine into a joint plausibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// Product over constrained metrics (independence).
    Product,
    /// Minimum over constrained metrics.
    Min,
}

/// Ternary outcome of classifying a point against a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    RuledOut,
    Uncertain,
    Plausible,
}

/// An emulator paired with a criterion and classification thresholds.
pub struct PlausibilityField<'a> {
    emulator: &'a dyn Emulator,
    criterion: PlausibilityCriterion,
    p_low: f64,
    p_high: f64,
    combine: CombineRule,
}

impl<'a> PlausibilityField<'a> {
    /// Default thresholds `p_low = 0.01`, `p_high = 0.99`, product rule.
    pub fn new(emulator: &'a dyn Emulator, criterion: PlausibilityCriterion) -> Result<Self> {
        if criterion.len() != emulator.metric_names().len() {
            return Err(CoreError::DimensionMismatch {
                expected: emulator.metric_names().len(),
                got: criterion.len(),
            });
        }
        Ok(Self {
            emulator,
            criterion,
            p_low: 0.01,
            p_high: 0.99,
            combine: CombineRule::Product,
        })
    }

    pub fn with_thresholds(mut self, p_low: f64, p_high: f64) -> Result<Self> {
        if !(0.0 < p_low && p_low < p_high && p_high < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "need 0 < p_low < p_high < 1, got ({p_low}, {p_high})"
            )));
        }
        self.p_low = p_low;
        self.p_high = p_high;
        Ok(self)
    }

    pub fn with_combine(mut self, rule: CombineRule) -> Self {
        self.combine = rule;
        self
    }

    pub fn emulator(&self) -> &'a dyn Emulator {
        self.emulator
    }

    pub fn criterion(&self) -> &PlausibilityCriterion {
        &self.criterion
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.p_low, self.p_high)
    }

    pub fn combine(&self) -> CombineRule {
        self.combine
    }

    /// Joint plausibility probability from per-metric `(mean, variance)`
    /// pairs. Zero variance degenerates to the closed-interval indicator.
    pub fn prob_from_mean_var(&self, preds: impl Iterator<Item = (f64, f64)>) -> f64 {
        let mut joint: f64 = 1.0;
        let mut any = false;
        for ((mean, variance), bound) in preds.zip(self.criterion.bounds()) {
            if !bound.is_constrained() {
                continue;
            }
            let sd = variance.max(0.0).sqrt();
            let p_m = if sd == 0.0 {
                if bound.contains(mean) {
                    1.0
                } else {
                    0.0
                }
            } else {
                let hi = phi((bound.upper - mean) / sd);
                let lo = phi((bound.lower - mean) / sd);
                (hi - lo).clamp(0.0, 1.0)
            };
            joint = match self.combine {
                CombineRule::Product => {
                    if any {
                        joint * p_m
                    } else {
                        p_m
                    }
                }
                CombineRule::Min => {
                    if any {
                        joint.min(p_m)
                    } else {
                        p_m
                    }
                }
            };
            any = true;
        }
        joint.clamp(0.0, 1.0)
    }

    pub fn prob_from_predictions(&self, preds: &[GaussianPrediction]) -> f64 {
        self.prob_from_mean_var(preds.iter().map(|p| (p.mean, p.variance)))
    }

    /// `P(theta in the plausible set)` under the emulator.
    pub fn plaus_prob(&self, theta: &Point) -> Result<f64> {
        let preds = self.emulator.predict(theta)?;
        Ok(self.prob_from_predictions(&preds))
    }

    /// Classification with strict threshold inequalities: boundary
    /// probabilities stay `Uncertain`.
    pub fn classify(&self, theta: &Point) -> Result<Classification> {
        Ok(self.classify_prob(self.plaus_prob(theta)?))
    }

    pub fn classify_prob(&self, p: f64) -> Classification {
        if p < self.p_low {
            Classification::RuledOut
        } else if p > self.p_high {
            Classification::Plausible
        } else {
            Classification::Uncertain
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::MetricBound;
    use crate::emulator::OracleEmulator;
    use crate::simulate::{constant_toy, TwoBoxEquilibrium};
    use crate::space::ParameterSpace;

    struct FixedEmulator {
        names: Vec<String>,
        preds: Vec<GaussianPrediction>,
    }

    impl Emulator for FixedEmulator {
        fn metric_names(&self) -> &[String] {
            &self.names
        }
        fn predict(&self, _: &Point) -> Result<Vec<GaussianPrediction>> {
            Ok(self.preds.clone())
        }
    }

    fn fixed(preds: Vec<(f64, f64)>) -> FixedEmulator {
        FixedEmulator {
            names: (0..preds.len()).map(|i| format!("m{i}")).collect(),
            preds: preds
                .into_iter()
                .map(|(mean, variance)| GaussianPrediction { mean, variance })
                .collect(),
        }
    }

    #[test]
    fn matches_gaussian_cdf_difference() {
        // D- = 0, D+ = 1, mu = 0.5, sigma = 0.5: p = Phi(1) - Phi(-1)
        let em = fixed(vec![(0.5, 0.25)]);
        let field =
            PlausibilityField::new(&em, PlausibilityCriterion::single(0.0, 1.0).unwrap()).unwrap();
        let p = field.plaus_prob(&Point::new(vec![0.0])).unwrap();
        assert!((p - 0.682_689_492_137_086).abs() < 1e-9, "p = {p}");
    }

    #[test]
    fn zero_variance_degenerates_to_indicator() {
        let inside = fixed(vec![(295.0, 0.0)]);
        let outside = fixed(vec![(290.0, 0.0)]);
        let crit = PlausibilityCriterion::single(294.5, 295.5).unwrap();
        let f_in = PlausibilityField::new(&inside, crit.clone()).unwrap();
        let f_out = PlausibilityField::new(&outside, crit).unwrap();
        let at = Point::new(vec![0.0]);
        assert_eq!(f_in.plaus_prob(&at).unwrap(), 1.0);
        assert_eq!(f_out.plaus_prob(&at).unwrap(), 0.0);
    }

    #[test]
    fn product_rule_multiplies_metrics() {
        // two metrics each with p = 0.5 (mu centered on an interval edge)
        let em = fixed(vec![(0.0, 1.0), (0.0, 1.0)]);
        let crit = PlausibilityCriterion::new(vec![
            MetricBound::new(0.0, f64::INFINITY).unwrap(),
            MetricBound::new(0.0, f64::INFINITY).unwrap(),
        ])
        .unwrap();
        let field = PlausibilityField::new(&em, crit.clone()).unwrap();
        let p = field.plaus_prob(&Point::new(vec![0.0])).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
        let field_min = PlausibilityField::new(&em, crit).unwrap().with_combine(CombineRule::Min);
        let p = field_min.plaus_prob(&Point::new(vec![0.0])).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_metrics_do_not_count() {
        let em = fixed(vec![(1e9, 1.0), (0.5, 0.0001)]);
        let crit = PlausibilityCriterion::new(vec![
            MetricBound::free(),
            MetricBound::new(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let field = PlausibilityField::new(&em, crit).unwrap();
        let p = field.plaus_prob(&Point::new(vec![0.0])).unwrap();
        assert!(p > 0.999_999);
    }

    #[test]
    fn classification_thresholds_are_strict() {
        let em = fixed(vec![(0.0, 1.0)]);
        let field =
            PlausibilityField::new(&em, PlausibilityCriterion::single(0.0, 1.0).unwrap())
                .unwrap()
                .with_thresholds(0.001, 0.999)
                .unwrap();
        assert_eq!(field.classify_prob(0.0005), Classification::RuledOut);
        assert_eq!(field.classify_prob(0.5), Classification::Uncertain);
        assert_eq!(field.classify_prob(0.999), Classification::Uncertain);
        assert_eq!(field.classify_prob(0.9995), Classification::Plausible);
        assert_eq!(field.classify_prob(0.001), Classification::Uncertain);
    }

    #[test]
    fn default_thresholds_classify_examples() {
        let em = fixed(vec![(0.0, 1.0)]);
        let field =
            PlausibilityField::new(&em, PlausibilityCriterion::single(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(field.classify_prob(0.001), Classification::RuledOut);
        assert_eq!(field.classify_prob(0.5), Classification::Uncertain);
        assert_eq!(field.classify_prob(0.9999), Classification::Plausible);
    }

    #[test]
    fn monotone_under_interval_widening() {
        let em = fixed(vec![(294.9, 0.09)]);
        let narrow = PlausibilityCriterion::single(294.5, 295.5).unwrap();
        let wide = PlausibilityCriterion::single(294.0, 296.0).unwrap();
        let p_narrow = PlausibilityField::new(&em, narrow)
            .unwrap()
            .plaus_prob(&Point::new(vec![0.0]))
            .unwrap();
        let p_wide = PlausibilityField::new(&em, wide)
            .unwrap()
            .plaus_prob(&Point::new(vec![0.0]))
            .unwrap();
        assert!(p_wide >= p_narrow);
    }

    #[test]
    fn oracle_field_reproduces_brute_force_region() {
        let sim = TwoBoxEquilibrium::default();
        let config = sim.config().clone();
        let oracle = OracleEmulator::new(sim);
        let crit = PlausibilityCriterion::single(294.5, 295.5).unwrap();
        let field = PlausibilityField::new(&oracle, crit).unwrap();
        let mut checked = 0;
        for i in 0..100 {
            for j in 0..100 {
                let g = 1.0 + (i as f64 + 0.5) / 100.0;
                let d = 30.0 + 20.0 * (j as f64 + 0.5) / 100.0;
                let t = config.equilibrium_temperature(g, d);
                let truth = (294.5..=295.5).contains(&t);
                let class = field.classify(&Point::new(vec![g, d])).unwrap();
                let expect = if truth {
                    Classification::Plausible
                } else {
                    Classification::RuledOut
                };
                assert_eq!(class, expect, "at ({g}, {d})");
                checked += 1;
            }
        }
        assert_eq!(checked, 100 * 100);
    }

    #[test]
    fn criterion_length_must_match_emulator() {
        let space = ParameterSpace::from_bounds(&[("x", 0.0, 1.0)]).unwrap();
        let sim = constant_toy(space, 1.0);
        let oracle = OracleEmulator::new(sim);
        let crit = PlausibilityCriterion::new(vec![
            MetricBound::new(0.0, 1.0).unwrap(),
            MetricBound::new(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        assert!(PlausibilityField::new(&oracle, crit).is_err());
    }
}
