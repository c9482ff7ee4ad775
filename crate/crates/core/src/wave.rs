//! The sequential history-matching wave loop.
//!
//! One wave: fit an emulator to everything simulated so far, filter a large
//! candidate pool through the emulator's plausibility probability under the
//! current wave's criterion, run the simulator on the accepted candidates,
//! and record how many of them really were plausible — the emulator success
//! rate that real campaigns track from wave to wave. Criteria tighten (or
//! stay fixed) across waves per the [`WaveSchedule`].

use serde::{Deserialize, Serialize};

use crate::criteria::{is_plausible, WaveSchedule};
use crate::design::filtered_design;
use crate::emulator::gp::{gp_fit_with, GpSettings};
use crate::emulator::regression::{stepwise_fit, RegSettings};
use crate::emulator::Emulator;
use crate::ensemble::{Ensemble, RunOutcome, RunRecord};
use crate::error::CoreError;
use crate::history::{Classification, CombineRule, PlausibilityField};
use crate::simulate::{run_batch, Simulator};
use crate::space::Point;
use crate::Result;

/// Which emulator family a wave fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmulatorKind {
    Gp(GpSettings),
    Regression(RegSettings),
}

/// Which records the wave's emulator trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitScope {
    /// All completed records, every wave (the default). Mistakes made by an
    /// early emulator wash out as data accumulates.
    AllCompleted,
    /// Only records the previous wave's emulator did not rule out. The
    /// emulator gets an easier response surface to model, but a region
    /// wrongly ruled out early can never come back.
    PreviousNroy,
}

/// Wave-loop configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveSettings {
    /// Simulator runs per wave.
    pub design_budget: usize,
    /// Candidate draws per filtering batch.
    pub candidate_batch: usize,
    /// Cap on candidate draws per wave.
    pub max_draws: usize,
    /// Plausibility probability at or above which a candidate is kept.
    pub accept_threshold: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub combine: CombineRule,
    pub emulator: EmulatorKind,
    /// Size of the uniform sample classified for the NROY estimate.
    pub nroy_sample: usize,
    pub refit_scope: RefitScope,
    pub workers: Option<usize>,
}

impl Default for WaveSettings {
    fn default() -> Self {
        Self {
            design_budget: 20,
            candidate_batch: 512,
            max_draws: 100_000,
            accept_threshold: 0.5,
            p_low: 0.01,
            p_high: 0.99,
            combine: CombineRule::Product,
            emulator: EmulatorKind::Gp(GpSettings::default()),
            nroy_sample: 2048,
            refit_scope: RefitScope::AllCompleted,
            workers: None,
        }
    }
}

/// Bookkeeping for one completed wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveStats {
    pub wave: u32,
    /// Candidates the emulator accepted and the simulator attempted.
    pub attempted: usize,
    pub completed: usize,
    /// Completed runs satisfying this wave's criterion.
    pub plausible: usize,
    /// `plausible / attempted` — the emulator success rate.
    pub acceptance_rate: f64,
    /// Acceptance rate of the candidate filter itself.
    pub filter_rate: f64,
}

/// Classified uniform sample standing in for the NROY region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NroyEstimate {
    pub points: Vec<Point>,
    pub classes: Vec<Classification>,
    pub plausible_fraction: f64,
    pub uncertain_fraction: f64,
    pub ruled_out_fraction: f64,
}

impl NroyEstimate {
    fn from_classified(points: Vec<Point>, classes: Vec<Classification>) -> Self {
        let n = classes.len().max(1) as f64;
        let count = |c: Classification| classes.iter().filter(|&&x| x == c).count() as f64 / n;
        NroyEstimate {
            plausible_fraction: count(Classification::Plausible),
            uncertain_fraction: count(Classification::Uncertain),
            ruled_out_fraction: count(Classification::RuledOut),
            points,
            classes,
        }
    }
}

/// State carried across waves: the data so far, the current emulator, the
/// latest NROY estimate and per-wave statistics.
pub struct WaveState {
    pub wave_index: u32,
    pub ensemble: Ensemble,
    pub emulator: Option<Box<dyn Emulator>>,
    pub nroy: Option<NroyEstimate>,
    pub history: Vec<WaveStats>,
}

impl WaveState {
    /// Starts from an initial-design ensemble (wave 0 records).
    pub fn initial(ensemble: Ensemble) -> Self {
        Self {
            wave_index: 0,
            ensemble,
            emulator: None,
            nroy: None,
            history: Vec::new(),
        }
    }
}

fn fit_emulator(
    ensemble: &Ensemble,
    sim: &dyn Simulator,
    kind: &EmulatorKind,
    seed: u64,
) -> Result<Box<dyn Emulator>> {
    let space = &sim.spec().input_space;
    Ok(match kind {
        EmulatorKind::Gp(settings) => Box::new(gp_fit_with(ensemble, space, settings, seed)?),
        EmulatorKind::Regression(settings) => Box::new(stepwise_fit(ensemble, space, settings)?),
    })
}

/// Runs one wave and returns the advanced state.
///
/// Steps: refresh the emulator from the configured training scope, filter
/// candidates against this wave's criterion via the plausibility
/// probability, run the simulator on the accepted points, append them as
/// wave `i + 1` records, and recompute the NROY estimate and acceptance
/// rate. An empty filter result propagates as the empty-plausible-set
/// signal with the wave recorded on it.
pub fn run_wave(
    state: WaveState,
    schedule: &WaveSchedule,
    sim: &dyn Simulator,
    settings: &WaveSettings,
    seed: u64,
) -> Result<WaveState> {
    let wave = state.wave_index as usize;
    if wave >= schedule.len() {
        return Err(CoreError::InvalidArgument(format!(
            "wave index {wave} outside schedule of length {}",
            schedule.len()
        )));
    }
    let criterion = &schedule.criteria()[wave];
    let space = &sim.spec().input_space;

    // (a) refresh the emulator
    let training = match (settings.refit_scope, &state.emulator, state.wave_index) {
        (RefitScope::PreviousNroy, Some(prev), w) if w > 0 => {
            let prev_criterion = schedule.criteria()[wave - 1].clone();
            let prev_field = PlausibilityField::new(prev.as_ref(), prev_criterion)?
                .with_thresholds(settings.p_low, settings.p_high)?
                .with_combine(settings.combine);
            let mut filtered = Ensemble::new(state.ensemble.metric_names().to_vec())?;
            for rec in state.ensemble.records() {
                if matches!(rec.outcome, RunOutcome::Completed(_))
                    && prev_field.classify(&rec.point)? != Classification::RuledOut
                {
                    filtered.push(rec.clone())?;
                }
            }
            filtered
        }
        _ => state.ensemble.clone(),
    };
    let emulator = fit_emulator(&training, sim, &settings.emulator, seed)?;
    let field = PlausibilityField::new(emulator.as_ref(), criterion.clone())?
        .with_thresholds(settings.p_low, settings.p_high)?
        .with_combine(settings.combine);

    // (b) emulator-filtered design for this wave
    let design = filtered_design(
        space,
        |theta| field.plaus_prob(theta),
        settings.accept_threshold,
        settings.design_budget,
        settings.candidate_batch,
        settings.max_draws,
        seed.wrapping_add(1),
    )
    .map_err(|e| match e {
        CoreError::EmptyPlausibleSet { draws, .. } => CoreError::EmptyPlausibleSet {
            draws,
            wave: Some(state.wave_index),
        },
        other => other,
    })?;

    // (c) run the simulator, (d) append as wave i+1
    let outcomes = run_batch(sim, &design.points, settings.workers)?;
    let mut ensemble = state.ensemble;
    let mut completed = 0usize;
    let mut plausible = 0usize;
    for (point, outcome) in design.points.iter().zip(&outcomes) {
        if let crate::simulate::SimOutcome::Completed(m) = outcome {
            completed += 1;
            if is_plausible(m, criterion)? {
                plausible += 1;
            }
        }
        ensemble.push(RunRecord {
            point: point.clone(),
            outcome: outcome.clone().into(),
            wave: state.wave_index + 1,
        })?;
    }

    // (e) NROY estimate and acceptance bookkeeping
    let reference = crate::acquisition::reference_sample(space, settings.nroy_sample, seed.wrapping_add(2))?;
    let classes: Vec<Classification> = reference
        .iter()
        .map(|p| field.classify(p))
        .collect::<Result<_>>()?;
    let nroy = NroyEstimate::from_classified(reference, classes);

    let attempted = design.points.len();
    let stats = WaveStats {
        wave: state.wave_index + 1,
        attempted,
        completed,
        plausible,
        acceptance_rate: plausible as f64 / attempted.max(1) as f64,
        filter_rate: design.acceptance_rate.unwrap_or(f64::NAN),
    };
    let mut history = state.history;
    history.push(stats);

    Ok(WaveState {
        wave_index: state.wave_index + 1,
        ensemble,
        emulator: Some(emulator),
        nroy: Some(nroy),
        history,
    })
}
