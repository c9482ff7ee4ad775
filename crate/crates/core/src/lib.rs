//! Calibration of expensive simulators under tight evaluation budgets.
//!
//! The crate finds the *plausible region* of a simulator's parameter space:
//! the set of inputs whose outputs cannot yet be ruled out as inconsistent
//! with observations. It combines four ingredients:
//!
//! * rejection ABC with an indicator kernel ([`abc`]),
//! * history matching against per-metric plausibility intervals
//!   ([`criteria`], [`history`]),
//! * cheap statistical emulators of the simulator — Gaussian processes and
//!   stepwise-selected regression surfaces ([`emulator`]),
//! * sequential designs that target the emulator's remaining uncertainty
//!   about the plausible region ([`design`], [`acquisition`]).
//!
//! The usual workflow: generate a space-filling design, run the simulator on
//! it, fit an emulator, then either filter a large candidate pool through the
//! emulator (wave-based history matching, [`wave`]) or add simulator runs one
//! batch at a time where the predicted plausibility surface is most uncertain
//! (entropy-driven acquisition).

pub mod abc;
pub mod acquisition;
pub mod criteria;
pub mod design;
pub mod emulator;
pub mod ensemble;
pub mod error;
pub mod history;
pub mod simulate;
pub mod space;
pub mod stats;
pub mod wave;

pub use abc::{rejection_abc, AbcConfig, AbcDistance, AbcResult, ToleranceRule};
pub use acquisition::{
    entropy, expected_entropy_if_added, mean_entropy, reference_sample, select_batch,
    BatchSelection, EntropyEstimate,
};
pub use criteria::{is_plausible, MetricBound, PlausibilityCriterion, WaveSchedule};
pub use design::{filtered_design, maximin_lhs, plain_lhs, sobol_design, uniform_sample, Design, GeneratorKind};
pub use emulator::{Emulator, GaussianPrediction, OracleEmulator};
pub use emulator::gp::{gp_fit, gp_fit_with, GpHyperparams, GpModel, GpSettings};
pub use emulator::regression::{stepwise_fit, RegModel, RegSettings, RegTerm};
pub use ensemble::{Ensemble, RunOutcome, RunRecord};
pub use error::CoreError;
pub use history::{Classification, CombineRule, PlausibilityField};
pub use simulate::{
    run_batch, SimOutcome, Simulator, SimulatorSpec, TwoBoxConfig, TwoBoxEquilibrium,
    TwoBoxTransient,
};
pub use space::{MetricVector, ParameterSpace, Point};
pub use wave::{run_wave, EmulatorKind, NroyEstimate, RefitScope, WaveSettings, WaveState, WaveStats};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
