//! Stepwise-selected linear + quadratic regression emulator.
//!
//! Candidate terms are the intercept, all linear terms, all pure quadratics
//! and (optionally) all pairwise interactions of the `[-1, 1]`-mapped
//! inputs; the mapping makes odd and even terms orthogonal over a symmetric
//! design, which is what makes the selection stable. Selection runs in two
//! phases: grow and prune by AIC until no single move improves it, then
//! prune further by the stricter BIC. Growing beyond the BIC constraint
//! first and shrinking afterwards avoids some local minima of a pure
//! BIC-stepwise search.
//!
//! With `p` coefficients on `n` points and residual sum of squares `RSS`:
//!
//! ```text
//! AIC = n ln(RSS/n) + 2 p        BIC = n ln(RSS/n) + p ln n
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::CoreError;
use crate::space::{ParameterSpace, Point};
use crate::Result;

use super::{Emulator, GaussianPrediction};

/// One regression term over `[-1, 1]`-mapped inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegTerm {
    Intercept,
    Linear(usize),
    Quadratic(usize),
    Interaction(usize, usize),
}

impl RegTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            RegTerm::Intercept => 1.0,
            RegTerm::Linear(j) => x[j],
            RegTerm::Quadratic(j) => x[j] * x[j],
            RegTerm::Interaction(j, l) => x[j] * x[l],
        }
    }
}

/// Candidate terms beyond the intercept, in canonical (tie-breaking) order.
fn candidate_terms(dim: usize, interactions: bool) -> Vec<RegTerm> {
    let mut terms: Vec<RegTerm> = (0..dim).map(RegTerm::Linear).collect();
    terms.extend((0..dim).map(RegTerm::Quadratic));
    if interactions {
        for j in 0..dim {
            for l in (j + 1)..dim {
                terms.push(RegTerm::Interaction(j, l));
            }
        }
    }
    terms
}

/// Stepwise-fit configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegSettings {
    /// Include pairwise interaction terms in the candidate set.
    pub interactions: bool,
    /// Cap on the number of coefficients (including the intercept);
    /// `None` leaves only the degrees-of-freedom guard.
    pub max_terms: Option<usize>,
}

impl Default for RegSettings {
    fn default() -> Self {
        Self {
            interactions: true,
            max_terms: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetricReg {
    /// Selected terms beyond the intercept, in canonical order.
    terms: Vec<RegTerm>,
    /// Coefficients, intercept first.
    coeffs: Vec<f64>,
    /// Unbiased residual variance.
    s2: f64,
    /// Upper-triangular R from the QR of the final design matrix, stored
    /// row-major; gives the leverage term of the predictive variance.
    r_factor: Vec<Vec<f64>>,
    n: usize,
}

/// A fitted stepwise regression emulator, one model per metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegModel {
    space: ParameterSpace,
    metric_names: Vec<String>,
    per_metric: Vec<MetricReg>,
}

struct Ols {
    coeffs: DVector<f64>,
    rss: f64,
    r: DMatrix<f64>,
}

/// Least squares via QR. Returns `None` when the design matrix is rank
/// deficient (a candidate move that would produce one is simply not taken).
fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Ols> {
    let p = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = r
        .diagonal()
        .iter()
        .fold(0.0f64, |acc, d| acc.max(d.abs()));
    if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * max_diag.max(1e-300)) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    let coeffs = r.solve_upper_triangular(&qty)?;
    let residual = y - x * &coeffs;
    let rss = residual.dot(&residual);
    debug_assert_eq!(coeffs.len(), p);
    Some(Ols { coeffs, rss, r })
}

fn design_matrix(x_unit: &[Vec<f64>], terms: &[RegTerm]) -> DMatrix<f64> {
    DMatrix::from_fn(x_unit.len(), terms.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            terms[j - 1].eval(&x_unit[i])
        }
    })
}

/// Information criteria use an RSS floor tied to the target scale so exact
/// fits (RSS at round-off level) don't drive `ln(RSS/n)` to -inf and make
/// every extra term look infinitely good.
fn rss_floor(n: usize, y: &DVector<f64>) -> f64 {
    let scale = y.dot(y) / n as f64 + 1.0;
    n as f64 * scale * 1e-24
}

fn criterion_value(rss: f64, floor: f64, n: usize, p: usize, penalty: f64) -> f64 {
    let n_f = n as f64;
    n_f * (rss.max(floor) / n_f).ln() + penalty * p as f64
}

/// Grows by AIC (forward steps interleaved with backward ones), then prunes
/// by BIC. See the ensemble-level wrapper [`stepwise_fit`].
fn fit_metric(
    name: &str,
    x_unit: &[Vec<f64>],
    y_raw: &[f64],
    settings: &RegSettings,
) -> Result<MetricReg> {
    let n = x_unit.len();
    let dim = x_unit[0].len();
    let y = DVector::from_column_slice(y_raw);
    let floor = rss_floor(n, &y);
    let candidates = candidate_terms(dim, settings.interactions);

    let mut selected: Vec<RegTerm> = Vec::new();
    let mut current = ols(&design_matrix(x_unit, &selected), &y).ok_or_else(|| {
        CoreError::FitFailure {
            metric: name.to_string(),
            reason: "intercept-only fit failed".into(),
        }
    })?;

    // Phase 1: forward-backward by AIC. Moves are compared with a strict
    // margin and candidates visited in canonical order, so ties resolve to
    // the lowest term index and builds are deterministic.
    enum Move {
        Add(RegTerm),
        Remove(RegTerm),
    }
    loop {
        let p = selected.len() + 1;
        let cur = criterion_value(current.rss, floor, n, p, 2.0);
        let mut best: Option<(f64, Move, Ols)> = None;

        let room = settings.max_terms.is_none_or(|cap| p < cap);
        if room && n as i64 - (p as i64 + 1) >= 1 {
            for &term in &candidates {
                if selected.contains(&term) {
                    continue;
                }
                let mut trial = selected.clone();
                trial.push(term);
                trial.sort_by_key(|t| candidates.iter().position(|c| c == t));
                if let Some(fit) = ols(&design_matrix(x_unit, &trial), &y) {
                    let val = criterion_value(fit.rss, floor, n, p + 1, 2.0);
                    if val < cur - 1e-12 && best.as_ref().is_none_or(|(b, _, _)| val < *b - 1e-12)
                    {
                        best = Some((val, Move::Add(term), fit));
                    }
                }
            }
        }
        for &term in &selected {
            let trial: Vec<RegTerm> = selected.iter().copied().filter(|&t| t != term).collect();
            if let Some(fit) = ols(&design_matrix(x_unit, &trial), &y) {
                let val = criterion_value(fit.rss, floor, n, p - 1, 2.0);
                if val < cur - 1e-12 && best.as_ref().is_none_or(|(b, _, _)| val < *b - 1e-12) {
                    best = Some((val, Move::Remove(term), fit));
                }
            }
        }

        match best {
            Some((_, Move::Add(term), fit)) => {
                selected.push(term);
                selected.sort_by_key(|t| candidates.iter().position(|c| c == t));
                current = fit;
            }
            Some((_, Move::Remove(term), fit)) => {
                selected.retain(|&t| t != term);
                current = fit;
            }
            None => break,
        }
    }

    // Phase 2: backward elimination by BIC.
    let ln_n = (n as f64).ln();
    loop {
        let p = selected.len() + 1;
        let cur = criterion_value(current.rss, floor, n, p, ln_n);
        let mut best: Option<(f64, RegTerm, Ols)> = None;
        for &term in &selected {
            let trial: Vec<RegTerm> = selected.iter().copied().filter(|&t| t != term).collect();
            if let Some(fit) = ols(&design_matrix(x_unit, &trial), &y) {
                let val = criterion_value(fit.rss, floor, n, p - 1, ln_n);
                if val < cur - 1e-12 && best.as_ref().is_none_or(|(b, _, _)| val < *b - 1e-12) {
                    best = Some((val, term, fit));
                }
            }
        }
        match best {
            Some((_, term, fit)) => {
                selected.retain(|&t| t != term);
                current = fit;
            }
            None => break,
        }
    }

    let p = selected.len() + 1;
    let dof = n - p;
    let s2 = if dof > 0 { current.rss / dof as f64 } else { 0.0 };
    let r_factor = (0..p)
        .map(|i| (0..p).map(|j| current.r[(i, j)]).collect())
        .collect();
    Ok(MetricReg {
        terms: selected,
        coeffs: current.coeffs.iter().copied().collect(),
        s2: s2.max(0.0),
        r_factor,
        n,
    })
}

/// Fits one stepwise regression per metric from the completed records.
pub fn stepwise_fit(
    ensemble: &Ensemble,
    space: &ParameterSpace,
    settings: &RegSettings,
) -> Result<RegModel> {
    let completed: Vec<_> = ensemble.completed().collect();
    if completed.len() < 3 {
        return Err(CoreError::InvalidArgument(format!(
            "stepwise fit needs at least 3 completed records, have {}",
            completed.len()
        )));
    }
    let x_unit: Vec<Vec<f64>> = completed
        .iter()
        .map(|(p, _, _)| space.map_to_unit(p))
        .collect::<Result<_>>()?;
    let per_metric = ensemble
        .metric_names()
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let column: Vec<f64> = completed.iter().map(|(_, mv, _)| mv.values()[m]).collect();
            fit_metric(name, &x_unit, &column, settings)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegModel {
        space: space.clone(),
        metric_names: ensemble.metric_names().to_vec(),
        per_metric,
    })
}

impl RegModel {
    pub fn terms(&self, metric: usize) -> &[RegTerm] {
        &self.per_metric[metric].terms
    }

    pub fn coefficients(&self, metric: usize) -> &[f64] {
        &self.per_metric[metric].coeffs
    }

    pub fn residual_variance(&self, metric: usize) -> f64 {
        self.per_metric[metric].s2
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn leverage(&self, metric: usize, x0: &DVector<f64>) -> f64 {
        // x0' (X'X)^-1 x0 = || R^-T x0 ||^2
        let m = &self.per_metric[metric];
        let p = m.coeffs.len();
        let r = DMatrix::from_fn(p, p, |i, j| m.r_factor[i][j]);
        match r.transpose().solve_lower_triangular(x0) {
            Some(u) => u.dot(&u),
            None => 0.0,
        }
    }
}

impl Emulator for RegModel {
    fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    fn predict(&self, point: &Point) -> Result<Vec<GaussianPrediction>> {
        let xu = self.space.map_to_unit(point)?;
        Ok(self
            .per_metric
            .iter()
            .enumerate()
            .map(|(mi, m)| {
                let x0 = DVector::from_iterator(
                    m.coeffs.len(),
                    std::iter::once(1.0).chain(m.terms.iter().map(|t| t.eval(&xu))),
                );
                let mean = x0.dot(&DVector::from_column_slice(&m.coeffs));
                let variance = m.s2 * (1.0 + self.leverage(mi, &x0));
                GaussianPrediction { mean, variance }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::uniform_sample;
    use crate::ensemble::{RunOutcome, RunRecord};
    use crate::space::MetricVector;

    fn fit_xy(
        space: &ParameterSpace,
        xs: &[Point],
        f: impl Fn(&[f64]) -> f64,
        settings: &RegSettings,
    ) -> RegModel {
        let mut ens = Ensemble::new(vec!["y".into()]).unwrap();
        for p in xs {
            let xu = space.map_to_unit(p).unwrap();
            ens.push(RunRecord {
                point: p.clone(),
                outcome: RunOutcome::Completed(MetricVector::new(vec![f(&xu)]).unwrap()),
                wave: 0,
            })
            .unwrap();
        }
        stepwise_fit(&ens, space, settings).unwrap()
    }

    fn square2() -> ParameterSpace {
        ParameterSpace::from_bounds(&[("x1", -1.0, 1.0), ("x2", -1.0, 1.0)]).unwrap()
    }

    #[test]
    fn recovers_exact_quadratic_truth() {
        // y = 2 + 3 x1 - x2^2, no noise, 50 points
        let space = square2();
        let xs = uniform_sample(&space, 50, 41).unwrap().points;
        let model = fit_xy(
            &space,
            &xs,
            |x| 2.0 + 3.0 * x[0] - x[1] * x[1],
            &RegSettings::default(),
        );
        assert_eq!(
            model.terms(0),
            &[RegTerm::Linear(0), RegTerm::Quadratic(1)],
            "selected {:?}",
            model.terms(0)
        );
        let c = model.coefficients(0);
        assert!((c[0] - 2.0).abs() < 1e-8, "intercept {}", c[0]);
        assert!((c[1] - 3.0).abs() < 1e-8, "linear {}", c[1]);
        assert!((c[2] + 1.0).abs() < 1e-8, "quadratic {}", c[2]);
        assert!(model.residual_variance(0) <= 1e-16, "{}", model.residual_variance(0));

        // prediction at the mapped origin is the intercept
        let mid = space.center();
        let pred = model.predict(&mid).unwrap()[0];
        assert!((pred.mean - 2.0).abs() < 1e-8);
    }

    #[test]
    fn noise_free_residuals_vanish() {
        let space = square2();
        let xs = uniform_sample(&space, 60, 4242).unwrap().points;
        let f = |x: &[f64]| 1.0 - 0.5 * x[0] + 2.0 * x[0] * x[1];
        let model = fit_xy(&space, &xs, f, &RegSettings::default());
        for p in &xs {
            let xu = space.map_to_unit(p).unwrap();
            let pred = model.predict(p).unwrap()[0];
            assert!((pred.mean - f(&xu)).abs() <= 1e-8);
        }
    }

    #[test]
    fn constant_data_gives_intercept_with_zero_variance() {
        let space = square2();
        let xs = uniform_sample(&space, 20, 5).unwrap().points;
        let model = fit_xy(&space, &xs, |_| 4.5, &RegSettings::default());
        assert!(model.terms(0).is_empty());
        let pred = model.predict(&space.center()).unwrap()[0];
        assert!((pred.mean - 4.5).abs() < 1e-12);
        assert!(pred.variance.abs() < 1e-20);
    }

    #[test]
    fn interactions_can_be_disabled() {
        let space = square2();
        let xs = uniform_sample(&space, 80, 7).unwrap().points;
        let f = |x: &[f64]| x[0] * x[1];
        let with = fit_xy(&space, &xs, f, &RegSettings::default());
        assert_eq!(with.terms(0), &[RegTerm::Interaction(0, 1)]);
        let without = fit_xy(
            &space,
            &xs,
            f,
            &RegSettings {
                interactions: false,
                max_terms: None,
            },
        );
        assert!(without
            .terms(0)
            .iter()
            .all(|t| !matches!(t, RegTerm::Interaction(..))));
    }

    #[test]
    fn predictive_variance_at_least_s2() {
        let space = square2();
        let xs = uniform_sample(&space, 40, 11).unwrap().points;
        // noisy-ish target that keeps s2 positive: cubic escapes the span
        let model = fit_xy(&space, &xs, |x| x[0] * x[0] * x[0], &RegSettings::default());
        let s2 = model.residual_variance(0);
        assert!(s2 > 0.0);
        for p in uniform_sample(&space, 50, 12).unwrap().points {
            let pred = model.predict(&p).unwrap()[0];
            assert!(pred.variance >= s2 - 1e-15);
        }
    }

    #[test]
    fn centroid_has_minimum_leverage_for_linear_model() {
        let space = square2();
        // symmetric design so the centroid of inputs is the mapped origin
        let xs: Vec<Point> = vec![
            Point::new(vec![-0.8, -0.8]),
            Point::new(vec![0.8, -0.8]),
            Point::new(vec![-0.8, 0.8]),
            Point::new(vec![0.8, 0.8]),
            Point::new(vec![-0.3, 0.3]),
            Point::new(vec![0.3, -0.3]),
        ];
        let model = fit_xy(
            &space,
            &xs,
            |x| 1.0 + x[0] + 0.5 * x[1],
            &RegSettings {
                interactions: false,
                max_terms: Some(3),
            },
        );
        let centroid_var = model.predict(&space.center()).unwrap()[0].variance;
        for p in &xs {
            let v = model.predict(p).unwrap()[0].variance;
            assert!(centroid_var <= v + 1e-15);
        }
    }

    #[test]
    fn needs_three_points(){
        let space = square2();
        let xs = uniform_sample(&space, 2, 3).unwrap().points;
        let mut ens = Ensemble::new(vec!["y".into()]).unwrap();
        for p in &xs {
            ens.push(RunRecord {
                point: p.clone(),
                outcome: RunOutcome::Completed(MetricVector::new(vec![1.0]).unwrap()),
                wave: 0,
            })
            .unwrap();
        }
        assert!(stepwise_fit(&ens, &space, &RegSettings::default()).is_err());
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let space = square2();
        let xs = uniform_sample(&space, 30, 21).unwrap().points;
        let model = fit_xy(&space, &xs, |x| 1.0 + x[1] - x[0] * x[0], &RegSettings::default());
        let back = RegModel::from_json(&model.to_json().unwrap()).unwrap();
        let q = Point::new(vec![0.25, -0.5]);
        assert_eq!(model.predict(&q).unwrap(), back.predict(&q).unwrap());
    }

    #[test]
    fn final_bic_beats_every_single_deletion() {
        let space = square2();
        let xs = uniform_sample(&space, 50, 33).unwrap().points;
        // quadratic truth plus a term outside the span to keep RSS > 0
        let f = |x: &[f64]| 2.0 + x[0] - 0.7 * x[1] * x[1] + 0.05 * (3.0 * x[0]).sin();
        let model = fit_xy(&space, &xs, f, &RegSettings::default());
        let terms = model.terms(0).to_vec();
        assert!(!terms.is_empty());

        let x_unit: Vec<Vec<f64>> = xs.iter().map(|p| space.map_to_unit(p).unwrap()).collect();
        let y = DVector::from_iterator(
            xs.len(),
            x_unit.iter().map(|xu| f(xu)),
        );
        let n = xs.len();
        let floor = rss_floor(n, &y);
        let full = ols(&design_matrix(&x_unit, &terms), &y).unwrap();
        let full_bic =
            criterion_value(full.rss, floor, n, terms.len() + 1, (n as f64).ln());
        for &drop in &terms {
            let trial: Vec<RegTerm> = terms.iter().copied().filter(|&t| t != drop).collect();
            let fit = ols(&design_matrix(&x_unit, &trial), &y).unwrap();
            let bic = criterion_value(fit.rss, floor, n, trial.len() + 1, (n as f64).ln());
            assert!(
                full_bic <= bic + 1e-9,
                "deleting {drop:?} improves BIC: {full_bic} vs {bic}"
            );
        }
    }
}
