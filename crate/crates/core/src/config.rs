//! Sectioned TOML configuration and scenario assembly.
//!
//! Every key has a default matching the reference vehicle, so a file only
//! needs the values it changes. Unknown keys are rejected.

use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::analysis::ObserverConstants;
use crate::controller::ControllerGains;
use crate::equilibrium::{solve_equilibrium, EquilibriumPoint, EquilibriumTarget};
use crate::error::{Error, Result};
use crate::field::Grid;
use crate::model::{AxleTireParams, FrictionLaw, Vehicle, VehicleBodyParams};
use crate::observer::{GainForm, Observer};
use crate::plant::Plant;
use crate::sim::{Mode, NoiseConfig, ObserverInput, Scenario, Scheme, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    pub vx: f64,
    pub m: f64,
    pub iz: f64,
    pub l1: f64,
    pub l2: f64,
    pub fw: f64,
    pub lw: f64,
    pub theta: f64,
    pub eps: f64,
}

impl Default for VehicleSection {
    fn default() -> Self {
        Self {
            vx: 50.0,
            m: 1300.0,
            iz: 2000.0,
            l1: 1.4,
            l2: 1.0,
            fw: -500.0,
            lw: -0.3,
            theta: 1.0,
            eps: 0.0,
        }
    }
}

/// Tire parameters of one axle. Omitted keys fall back to the reference
/// value of that axle, so both sections share one type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxleSection {
    pub length: Option<f64>,
    pub sigma: Option<f64>,
    pub phi: Option<f64>,
    /// Defaults to `1 - phi`.
    pub psi: Option<f64>,
    pub a: Option<f64>,
    pub fz: Option<f64>,
    pub mu: Option<f64>,
}

impl AxleSection {
    fn front() -> Self {
        Self {
            length: Some(0.11),
            sigma: Some(240.0),
            phi: Some(0.92),
            psi: None,
            a: Some(0.1),
            fz: Some(2660.0),
            mu: Some(1.0),
        }
    }

    fn rear() -> Self {
        Self {
            length: Some(0.09),
            sigma: Some(269.0),
            fz: Some(3720.0),
            ..Self::front()
        }
    }

    fn or(&self, base: &Self) -> Self {
        Self {
            length: self.length.or(base.length),
            sigma: self.sigma.or(base.sigma),
            phi: self.phi.or(base.phi),
            psi: self.psi.or(base.psi),
            a: self.a.or(base.a),
            fz: self.fz.or(base.fz),
            mu: self.mu.or(base.mu),
        }
    }

    fn build(&self, base: &Self) -> AxleTireParams {
        let r = self.or(base);
        let phi = r.phi.unwrap_or(0.92);
        AxleTireParams {
            length: r.length.unwrap_or_default(),
            sigma: r.sigma.unwrap_or_default(),
            phi,
            psi: r.psi.unwrap_or(1.0 - phi),
            a: r.a.unwrap_or_default(),
            fz: r.fz.unwrap_or_default(),
            mu: FrictionLaw::Constant(r.mu.unwrap_or(1.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub n_intervals: usize,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub delay_u: f64,
    pub mode: Mode,
    pub observer_input: ObserverInput,
    pub x0: [f64; 2],
    pub z0: [f64; 2],
    pub x_hat0: [f64; 2],
    pub z_hat0: [f64; 2],
    pub open_loop_input: [f64; 2],
    pub log_interval: f64,
    pub max_snapshots: usize,
    pub divergence_norm: f64,
    pub settle_time: f64,
    pub tail_window: f64,
    pub observer_tol: f64,
    pub stable_tol: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_intervals: 50,
            t_end: d.t_end,
            dt: d.dt,
            scheme: d.scheme,
            seed: d.seed,
            delay_u: d.delay_u,
            mode: d.mode,
            observer_input: d.observer_input,
            x0: d.x0,
            z0: d.z0,
            x_hat0: d.x_hat0,
            z_hat0: d.z_hat0,
            open_loop_input: d.open_loop_input,
            log_interval: d.log_interval,
            max_snapshots: d.max_snapshots,
            divergence_norm: d.divergence_norm,
            settle_time: d.settle_time,
            tail_window: d.tail_window,
            observer_tol: d.observer_tol,
            stable_tol: d.stable_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub q: f64,
    /// Target lumped state; ignored when `target_u` is given.
    pub target_x: [f64; 2],
    pub target_u: Option<[f64; 2]>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            q: 2.0,
            target_x: [0.0, 0.0],
            target_u: None,
        }
    }
}

impl ControllerSection {
    pub fn target(&self) -> EquilibriumTarget {
        match self.target_u {
            Some(u) => EquilibriumTarget::Input(Vector2::from(u)),
            None => EquilibriumTarget::State(Vector2::from(self.target_x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSection {
    /// Run the observer alongside the plant (always on in output feedback).
    pub enabled: bool,
    pub p: f64,
    pub gain_form: GainForm,
}

impl Default for ObserverSection {
    fn default() -> Self {
        Self {
            enabled: false,
            p: 2.0,
            gain_form: GainForm::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Delay,
    IcScale,
    ObserverGain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
    /// Base initial state scaled by `-k` on the `ic_scale` axis.
    pub ic_base: [f64; 2],
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: None,
            values: Vec::new(),
            ic_base: [0.3, -0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub vehicle: VehicleSection,
    pub axle1: AxleSection,
    pub axle2: AxleSection,
    pub sim: SimSection,
    pub controller: ControllerSection,
    pub observer: ObserverSection,
    pub noise: NoiseConfig,
    pub sweep: SweepSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            vehicle: VehicleSection::default(),
            axle1: AxleSection::front(),
            axle2: AxleSection::rear(),
            sim: SimSection::default(),
            controller: ControllerSection::default(),
            observer: ObserverSection::default(),
            noise: NoiseConfig::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Everything derived from a configuration before time stepping.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub plant: Plant,
    pub equilibrium: Option<EquilibriumPoint>,
    pub scenario: Scenario,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    /// Open-loop run from the destabilizing initial condition.
    pub fn open_loop() -> Self {
        Self::default()
    }

    /// Open-loop run with the observer switched on.
    pub fn observer_open_loop(p: f64) -> Self {
        let mut c = Self::default();
        c.observer.enabled = true;
        c.observer.p = p;
        c.sim.t_end = 5.0;
        c.sim.divergence_norm = 1e3;
        c
    }

    /// Output feedback with sensor noise and a 0.2 s actuator delay.
    pub fn closed_loop() -> Self {
        let mut c = Self::default();
        c.sim.mode = Mode::OutputFeedback;
        c.sim.seed = 42;
        c.sim.delay_u = 0.2;
        c.observer.enabled = true;
        c.noise.enabled = true;
        c
    }

    pub fn vehicle(&self) -> Result<Vehicle> {
        let v = &self.vehicle;
        let body = VehicleBodyParams {
            m: v.m,
            iz: v.iz,
            l1: v.l1,
            l2: v.l2,
            vx: v.vx,
            fw: v.fw,
            lw: v.lw,
            theta: v.theta,
            eps: v.eps,
        };
        Vehicle::new(
            body,
            [self.axle1.build(&AxleSection::front()), self.axle2.build(&AxleSection::rear())],
        )
    }

    pub fn plant(&self) -> Result<Plant> {
        Ok(Plant::new(self.vehicle()?, Grid::uniform(self.sim.n_intervals)?))
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            t_end: s.t_end,
            dt: s.dt,
            scheme: s.scheme,
            seed: s.seed,
            delay_u: s.delay_u,
            noise: self.noise.clone(),
            mode: s.mode,
            observer_input: s.observer_input,
            x0: s.x0,
            z0: s.z0,
            x_hat0: s.x_hat0,
            z_hat0: s.z_hat0,
            open_loop_input: s.open_loop_input,
            log_interval: s.log_interval,
            max_snapshots: s.max_snapshots,
            divergence_norm: s.divergence_norm,
            settle_time: s.settle_time,
            tail_window: s.tail_window,
            observer_tol: s.observer_tol,
            stable_tol: s.stable_tol,
            courant_limit: None,
        }
    }

    pub fn observer_active(&self) -> bool {
        self.observer.enabled || self.sim.mode == Mode::OutputFeedback
    }

    pub fn controller_active(&self) -> bool {
        self.sim.mode != Mode::OpenLoop
    }

    /// Builds the plant and, as required by the mode, the equilibrium,
    /// controller gains and observer; validates the resulting scenario.
    pub fn assemble(&self) -> Result<Assembled> {
        let plant = self.plant()?;
        let config = self.sim_config();
        config.validate(&plant)?;
        let observer = if self.observer_active() {
            Some(Observer::new(self.observer.p, &plant.vehicle.mats, self.observer.gain_form)?)
        } else {
            None
        };
        let (equilibrium, controller) = if self.controller_active() {
            let eq = solve_equilibrium(&plant, self.controller.target())?;
            let gains = ControllerGains::synthesize(&plant, eq.clone(), self.controller.q)?;
            (Some(eq), Some(gains))
        } else {
            (None, None)
        };
        let observer_constants = match (&controller, &observer) {
            (Some(c), Some(o)) => Some(ObserverConstants::compute(&plant, c, o)),
            _ => None,
        };
        let scenario = Scenario {
            plant: plant.clone(),
            controller,
            observer,
            observer_constants,
            config,
        };
        scenario.validate()?;
        Ok(Assembled {
            plant,
            equilibrium,
            scenario,
        })
    }
}
