//! A two-box energy-balance simulator with an analytic equilibrium.
//!
//! The model tracks a surface box (temperature `Ts`, heat capacity `Cs`)
//! coupled to a deep box (`Td`, `Cd`):
//!
//! ```text
//! Cs dTs/dt = F(gamma) - lambda(d) * (Ts - Tref) - k_mix * (Ts - Td)
//! Cd dTd/dt = k_mix * (Ts - Td)
//! ```
//!
//! with radiative forcing `F(gamma) = F0 + a * gamma` driven by the water
//! vapour emissivity parameter `GAMMA` in `[1, 2]`, and feedback strength
//! `lambda(d) = lambda0 * (1 + (d - 40)/100)` driven by the critical
//! convective temperature gradient `DTCRIT` in `[30, 50]`. At equilibrium
//! both boxes sit at
//!
//! ```text
//! Ts = Tref + F(gamma) / lambda(d)
//! ```
//!
//! so every downstream claim about the plausible region can be checked
//! against a closed form. Forcing rises with `gamma` and feedback rises
//! with `d`, which makes the region where `Ts` lands in a fixed band a
//! curved strip crossing the domain — a single connected region with a
//! boundary, which is what makes the calibration problem interesting.
//!
//! [`TwoBoxEquilibrium`] returns the closed form directly.
//! [`TwoBoxTransient`] integrates the system with forward Euler from
//! `Ts = Td = Tref`, the "spin-up to equilibrium" usage pattern of real
//! Earth-system models, and reports a `diverged` failure if the step size
//! makes the integration blow up.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::space::{MetricVector, ParameterSpace, Point};
use crate::Result;

use super::{SimOutcome, Simulator, SimulatorSpec};

/// Physical and numerical constants of the two-box model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoBoxConfig {
    /// Forcing offset (W m^-2). Default 3.0.
    pub f0: f64,
    /// Forcing per unit gamma (W m^-2); default `5.35 * ln 2`, the canonical
    /// CO2-doubling forcing coefficient.
    pub forcing_per_gamma: f64,
    /// Feedback strength at `d = 40` (W m^-2 K^-1). Default 1.0.
    pub lambda0: f64,
    /// Reference temperature (K). Default 288.0.
    pub t_ref: f64,
    /// Surface-deep coupling coefficient (W m^-2 K^-1). Default 0.5.
    pub k_mix: f64,
    /// Surface box heat capacity (J m^-2 K^-1). Default 1.0e8.
    pub c_surface: f64,
    /// Deep box heat capacity (J m^-2 K^-1). Default 1.0e9.
    pub c_deep: f64,
    /// Euler step (s). Default 2.0e6.
    pub dt: f64,
    /// Number of Euler steps. Default 20_000.
    pub n_steps: usize,
}

impl Default for TwoBoxConfig {
    fn default() -> Self {
        Self {
            f0: 3.0,
            forcing_per_gamma: 5.35 * std::f64::consts::LN_2,
            lambda0: 1.0,
            t_ref: 288.0,
            k_mix: 0.5,
            c_surface: 1.0e8,
            c_deep: 1.0e9,
            dt: 2.0e6,
            n_steps: 20_000,
        }
    }
}

impl TwoBoxConfig {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.f0,
            self.forcing_per_gamma,
            self.lambda0,
            self.t_ref,
            self.k_mix,
            self.c_surface,
            self.c_deep,
            self.dt,
        ]
        .iter()
        .all(|&v| v > 0.0 && v.is_finite());
        if !all_positive || self.n_steps == 0 {
            return Err(CoreError::InvalidArgument(
                "two-box coefficients must be strictly positive".into(),
            ));
        }
        // lambda must stay positive across the whole DTCRIT range
        if self.lambda(30.0) <= 0.0 || self.lambda(50.0) <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "feedback strength must be positive over d in [30, 50]".into(),
            ));
        }
        Ok(())
    }

    /// Radiative forcing `F(gamma) = F0 + a * gamma`.
    pub fn forcing(&self, gamma: f64) -> f64 {
        self.f0 + self.forcing_per_gamma * gamma
    }

    /// Feedback strength `lambda(d) = lambda0 * (1 + (d - 40)/100)`.
    pub fn lambda(&self, d: f64) -> f64 {
        self.lambda0 * (1.0 + (d - 40.0) / 100.0)
    }

    /// Analytic equilibrium surface temperature `Tref + F(gamma)/lambda(d)`.
    pub fn equilibrium_temperature(&self, gamma: f64, d: f64) -> f64 {
        self.t_ref + self.forcing(gamma) / self.lambda(d)
    }
}

/// Canonical input space: `GAMMA` in `[1, 2]`, `DTCRIT` in `[30, 50]`.
pub fn two_box_space() -> ParameterSpace {
    ParameterSpace::from_bounds(&[("GAMMA", 1.0, 2.0), ("DTCRIT", 30.0, 50.0)])
        .expect("static bounds")
}

fn two_box_spec() -> SimulatorSpec {
    SimulatorSpec::new(two_box_space(), vec!["T_surface".into()]).expect("static spec")
}

/// The two-box model evaluated at its analytic equilibrium.
#[derive(Debug, Clone)]
pub struct TwoBoxEquilibrium {
    config: TwoBoxConfig,
    spec: SimulatorSpec,
}

impl TwoBoxEquilibrium {
    pub fn new(config: TwoBoxConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            spec: two_box_spec(),
        })
    }

    pub fn config(&self) -> &TwoBoxConfig {
        &self.config
    }
}

impl Default for TwoBoxEquilibrium {
    fn default() -> Self {
        Self::new(TwoBoxConfig::default()).expect("default config is valid")
    }
}

impl Simulator for TwoBoxEquilibrium {
    fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    fn run(&self, point: &Point) -> Result<SimOutcome> {
        self.spec.input_space.check_contains(point)?;
        let (gamma, d) = (point.coords()[0], point.coords()[1]);
        let ts = self.config.equilibrium_temperature(gamma, d);
        Ok(SimOutcome::Completed(MetricVector::new(vec![ts])?))
    }
}

/// The two-box model spun up by forward Euler integration.
#[derive(Debug, Clone)]
pub struct TwoBoxTransient {
    config: TwoBoxConfig,
    spec: SimulatorSpec,
}

impl TwoBoxTransient {
    pub fn new(config: TwoBoxConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            spec: two_box_spec(),
        })
    }

    pub fn config(&self) -> &TwoBoxConfig {
        &self.config
    }

    /// Integrates and returns the final `(Ts, Td)` pair, or the step at
    /// which the state blew up.
    fn integrate(&self, gamma: f64, d: f64) -> std::result::Result<(f64, f64), usize> {
        let c = &self.config;
        let forcing = c.forcing(gamma);
        let lambda = c.lambda(d);
        let mut ts = c.t_ref;
        let mut td = c.t_ref;
        for step in 0..c.n_steps {
            let flux = c.k_mix * (ts - td);
            let dts = (forcing - lambda * (ts - c.t_ref) - flux) / c.c_surface;
            let dtd = flux / c.c_deep;
            ts += c.dt * dts;
            td += c.dt * dtd;
            if !ts.is_finite() || ts.abs() > 1.0e4 {
                return Err(step);
            }
        }
        Ok((ts, td))
    }
}

impl Default for TwoBoxTransient {
    fn default() -> Self {
        Self::new(TwoBoxConfig::default()).expect("default config is valid")
    }
}

impl Simulator for TwoBoxTransient {
    fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    fn run(&self, point: &Point) -> Result<SimOutcome> {
        self.spec.input_space.check_contains(point)?;
        let (gamma, d) = (point.coords()[0], point.coords()[1]);
        match self.integrate(gamma, d) {
            Ok((ts, _)) => Ok(SimOutcome::Completed(MetricVector::new(vec![ts])?)),
            Err(_) => Ok(SimOutcome::Failed("diverged".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_matches_hand_computation() {
        let sim = TwoBoxEquilibrium::default();
        // gamma=1, d=40: T = 288 + (3 + 5.35 ln2)/1
        let expect = 288.0 + 3.0 + 5.35 * std::f64::consts::LN_2;
        match sim.run(&Point::new(vec![1.0, 40.0])).unwrap() {
            SimOutcome::Completed(m) => {
                assert!((m.values()[0] - expect).abs() < 1e-12);
                assert!((m.values()[0] - 294.708).abs() < 1e-3);
            }
            _ => panic!("failed"),
        }
        // gamma=2, d=40 is implausible territory
        match sim.run(&Point::new(vec![2.0, 40.0])).unwrap() {
            SimOutcome::Completed(m) => assert!((m.values()[0] - 298.416).abs() < 1e-3),
            _ => panic!("failed"),
        }
    }

    #[test]
    fn lambda_is_identity_at_d40() {
        let c = TwoBoxConfig::default();
        assert_eq!(c.lambda(40.0), c.lambda0);
        // T depends only on gamma there
        assert_eq!(
            c.equilibrium_temperature(1.3, 40.0),
            c.t_ref + c.forcing(1.3)
        );
    }

    #[test]
    fn equilibrium_monotone_in_gamma_and_d() {
        let c = TwoBoxConfig::default();
        let h = 1e-4;
        for i in 0..10 {
            for j in 0..10 {
                let g = 1.0 + 0.1 * i as f64 + 0.05;
                let d = 30.0 + 2.0 * j as f64 + 1.0;
                let t0 = c.equilibrium_temperature(g, d);
                assert!(c.equilibrium_temperature(g + h, d) > t0);
                assert!(c.equilibrium_temperature(g, d + h) < t0);
            }
        }
    }

    #[test]
    fn transient_reaches_analytic_equilibrium() {
        let sim = TwoBoxTransient::default();
        let expect = sim.config().equilibrium_temperature(1.0, 40.0);
        match sim.run(&Point::new(vec![1.0, 40.0])).unwrap() {
            SimOutcome::Completed(m) => {
                assert!(
                    (m.values()[0] - expect).abs() <= 1e-3,
                    "transient {} vs analytic {expect}",
                    m.values()[0]
                );
            }
            _ => panic!("failed"),
        }
    }

    #[test]
    fn zero_coupling_leaves_deep_box_untouched() {
        let mut config = TwoBoxConfig::default();
        config.k_mix = f64::MIN_POSITIVE; // validation needs > 0
        let sim = TwoBoxTransient::new(config).unwrap();
        let (_, td) = sim.integrate(1.5, 35.0).unwrap();
        assert_eq!(td, sim.config().t_ref);
    }

    #[test]
    fn oversized_step_diverges() {
        // dt 100x the default exceeds the stability bound
        // 2*Cs/(lambda + k_mix) ~ 1.33e8 s and oscillates to blow-up.
        let mut config = TwoBoxConfig::default();
        config.dt *= 100.0;
        let sim = TwoBoxTransient::new(config).unwrap();
        match sim.run(&Point::new(vec![1.0, 40.0])).unwrap() {
            SimOutcome::Failed(reason) => assert_eq!(reason, "diverged"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn transient_agrees_with_analytic_on_grid() {
        let sim = TwoBoxTransient::default();
        let c = sim.config().clone();
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            for j in 0..20 {
                let g = 1.0 + (i as f64 + 0.5) / 20.0;
                let d = 30.0 + 20.0 * (j as f64 + 0.5) / 20.0;
                let (ts, _) = sim.integrate(g, d).unwrap();
                worst = worst.max((ts - c.equilibrium_temperature(g, d)).abs());
            }
        }
        assert!(worst <= 1e-3, "worst grid deviation {worst}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = TwoBoxConfig::default();
        c.lambda0 = -1.0;
        assert!(c.validate().is_err());
        let mut c = TwoBoxConfig::default();
        c.n_steps = 0;
        assert!(c.validate().is_err());
    }
}
