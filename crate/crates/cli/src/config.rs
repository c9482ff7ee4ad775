//! Study configuration: one JSON document describing the space, metrics,
//! simulator, criteria schedule, budgets and emulator settings of a study.
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "two-box-demo",
//!   "space": { "params": [
//!     { "name": "GAMMA",  "lower": 1.0,  "upper": 2.0 },
//!     { "name": "DTCRIT", "lower": 30.0, "upper": 50.0 } ] },
//!   "metrics": ["T_surface"],
//!   "simulator": { "kind": "two_box_equilibrium" },
//!   "schedule": { "criteria": [
//!     { "intervals": [ { "lower": 294.5, "upper": 295.5 } ] } ] },
//!   "seed": 42,
//!   "budgets": { "initial_design": 10, "wave_budget": 20 },
//!   "emulator": { "kind": "gp" },
//!   "thresholds": { "p_low": 0.01, "p_high": 0.99, "accept": 0.5 },
//!   "acquisition": { "reference_size": 1024, "candidate_pool": 1024,
//!                    "mc_draws": 256, "batch": 1 },
//!   "abc": { "budget": 1000, "tolerance": { "fixed": 0.0 } }
//! }
//! ```
//!
//! `null` interval ends mean unconstrained. `NROY_WORKERS` and
//! `NROY_TIMEOUT_SECS` override the worker count and external-simulator
//! timeout from the environment; nothing else is overridable that way.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use nroy_core::abc::ToleranceRule;
use nroy_core::history::CombineRule;
use nroy_core::simulate::{
    ExternalSimulator, Simulator, SimulatorSpec, TwoBoxConfig, TwoBoxEquilibrium, TwoBoxTransient,
};
use nroy_core::wave::{EmulatorKind, RefitScope, WaveSettings};
use nroy_core::{GpSettings, ParameterSpace, WaveSchedule};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub version: u32,
    pub name: String,
    pub space: ParameterSpace,
    pub metrics: Vec<String>,
    pub simulator: SimulatorConfig,
    pub schedule: WaveSchedule,
    pub seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_emulator")]
    pub emulator: EmulatorKind,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub abc: AbcSection,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_emulator() -> EmulatorKind {
    EmulatorKind::Gp(GpSettings::default())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimulatorConfig {
    TwoBoxEquilibrium {
        #[serde(default)]
        config: Option<TwoBoxConfig>,
    },
    TwoBoxTransient {
        #[serde(default)]
        config: Option<TwoBoxConfig>,
    },
    External {
        command: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    /// Points in the initial space-filling design.
    pub initial_design: usize,
    /// Simulator runs per history-matching wave.
    pub wave_budget: usize,
    /// Candidate draws per filtering batch.
    pub candidate_batch: usize,
    /// Cap on candidate draws when filtering.
    pub max_draws: usize,
    /// Restarts for the maximin design search.
    pub design_restarts: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            initial_design: 10,
            wave_budget: 20,
            candidate_batch: 512,
            max_draws: 100_000,
            design_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub p_low: f64,
    pub p_high: f64,
    /// Plausibility probability at or above which the candidate filter
    /// keeps a point.
    pub accept: f64,
    pub combine: CombineRule,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            p_low: 0.01,
            p_high: 0.99,
            accept: 0.5,
            combine: CombineRule::Product,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub reference_size: usize,
    pub candidate_pool: usize,
    pub mc_draws: usize,
    /// Points chosen per acquisition round (`d`: usually the core count).
    pub batch: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            reference_size: 1024,
            candidate_pool: 1024,
            mc_draws: 256,
            batch: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AbcSection {
    pub budget: usize,
    pub tolerance: ToleranceSection,
    /// Distance: the default derives the interval-violation distance from
    /// the final schedule criterion; a weighted Euclidean alternative can
    /// be given explicitly.
    pub distance: Option<DistanceSection>,
}

impl Default for AbcSection {
    fn default() -> Self {
        Self {
            budget: 1000,
            tolerance: ToleranceSection::Fixed(0.0),
            distance: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceSection {
    Fixed(f64),
    Quantile(f64),
}

impl From<ToleranceSection> for ToleranceRule {
    fn from(t: ToleranceSection) -> Self {
        match t {
            ToleranceSection::Fixed(e) => ToleranceRule::Fixed(e),
            ToleranceSection::Quantile(q) => ToleranceRule::Quantile(q),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSection {
    WeightedEuclidean { targets: Vec<f64>, weights: Vec<f64> },
}

impl StudyConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let config: StudyConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != 1 {
            return Err(CliError::Validation(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        if self.metrics.is_empty() {
            return Err(CliError::Validation("no metrics declared".into()));
        }
        for criterion in self.schedule.criteria() {
            if criterion.len() != self.metrics.len() {
                return Err(CliError::Validation(format!(
                    "criterion constrains {} metrics, study declares {}",
                    criterion.len(),
                    self.metrics.len()
                )));
            }
        }
        // built-in simulators own their space and metrics; the study must
        // agree with them
        match &self.simulator {
            SimulatorConfig::External { .. } => {}
            _ => {
                let sim = self.simulator()?;
                if sim.spec().input_space != self.space {
                    return Err(CliError::Validation(
                        "study space does not match the built-in simulator's space".into(),
                    ));
                }
                if sim.spec().metric_names != self.metrics {
                    return Err(CliError::Validation(
                        "study metrics do not match the built-in simulator's metrics".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Instantiates the configured simulator, applying environment
    /// overrides for the external timeout.
    pub fn simulator(&self) -> CliResult<Box<dyn Simulator>> {
        Ok(match &self.simulator {
            SimulatorConfig::TwoBoxEquilibrium { config } => Box::new(
                TwoBoxEquilibrium::new(config.clone().unwrap_or_default())
                    .map_err(|e| CliError::Validation(e.to_string()))?,
            ),
            SimulatorConfig::TwoBoxTransient { config } => Box::new(
                TwoBoxTransient::new(config.clone().unwrap_or_default())
                    .map_err(|e| CliError::Validation(e.to_string()))?,
            ),
            SimulatorConfig::External {
                command,
                timeout_secs,
            } => {
                let spec = SimulatorSpec::new(self.space.clone(), self.metrics.clone())
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                let timeout = env_u64("NROY_TIMEOUT_SECS").unwrap_or(*timeout_secs);
                Box::new(ExternalSimulator::new(
                    command.clone(),
                    spec,
                    Duration::from_secs(timeout),
                ))
            }
        })
    }

    /// Worker count after the environment override.
    pub fn effective_workers(&self) -> Option<usize> {
        env_u64("NROY_WORKERS")
            .map(|w| w as usize)
            .or(self.workers)
    }

    /// Wave settings assembled from the study sections.
    pub fn wave_settings(&self) -> WaveSettings {
        WaveSettings {
            design_budget: self.budgets.wave_budget,
            candidate_batch: self.budgets.candidate_batch,
            max_draws: self.budgets.max_draws,
            accept_threshold: self.thresholds.accept,
            p_low: self.thresholds.p_low,
            p_high: self.thresholds.p_high,
            combine: self.thresholds.combine,
            emulator: self.emulator.clone(),
            nroy_sample: 2048,
            refit_scope: RefitScope::AllCompleted,
            workers: self.effective_workers(),
        }
    }
}

fn env_u64(name: &str) -> Option<u64> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

/// The study bundled with the repository: history matching the two-box
/// simulator toward the `[294.5, 295.5] K` surface-temperature band.
pub fn bundled_two_box_study() -> StudyConfig {
    let space = nroy_core::simulate::two_box_space();
    StudyConfig {
        version: 1,
        name: "two-box-demo".into(),
        space,
        metrics: vec!["T_surface".into()],
        simulator: SimulatorConfig::TwoBoxEquilibrium { config: None },
        schedule: WaveSchedule::new(vec![
            nroy_core::PlausibilityCriterion::single(294.5, 295.5).unwrap(),
            nroy_core::PlausibilityCriterion::single(294.5, 295.5).unwrap(),
        ])
        .unwrap(),
        seed: 42,
        budgets: Budgets::default(),
        emulator: default_emulator(),
        thresholds: Thresholds::default(),
        acquisition: AcquisitionConfig::default(),
        abc: AbcSection::default(),
        workers: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_study_is_valid_and_round_trips() {
        let study = bundled_two_box_study();
        study.validate().unwrap();
        let json = serde_json::to_string_pretty(&study).unwrap();
        let back: StudyConfig = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(back.name, study.name);
    }

    #[test]
    fn mismatched_builtin_space_is_rejected() {
        let mut study = bundled_two_box_study();
        study.space = ParameterSpace::from_bounds(&[("a", 0.0, 1.0)]).unwrap();
        assert!(study.validate().is_err());
    }

    #[test]
    fn minimal_external_config_parses() {
        let text = r#"{
            "version": 1,
            "name": "ext",
            "space": {"params": [{"name": "x", "lower": 0.0, "upper": 1.0}]},
            "metrics": ["y"],
            "simulator": {"kind": "external", "command": "cat"},
            "schedule": {"criteria": [{"intervals": [{"lower": 0.2, "upper": 0.8}]}]},
            "seed": 7
        }"#;
        let config: StudyConfig = serde_json::from_str(text).unwrap();
        config.validate().unwrap();
        assert_eq!(config.budgets.initial_design, 10);
        assert!(matches!(
            config.abc.tolerance,
            ToleranceSection::Fixed(e) if e == 0.0
        ));
    }
}
