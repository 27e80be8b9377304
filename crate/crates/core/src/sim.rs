//! Fixed-step integration of the plant and observer with an actuator delay
//! line, sampled measurement noise and trace logging.

use std::collections::VecDeque;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::{composite_v, lyapunov_v1, lyapunov_v2, state_norm, ObserverConstants};
use crate::controller::ControllerGains;
use crate::error::{invalid, Result};
use crate::field::DistributedField;
use crate::model::{LumpedState, Steering};
use crate::observer::Observer;
use crate::plant::{Plant, PlantState};

/// Largest stable Courant number of classical RK4 applied to the upwind
/// transport term (imaginary-axis and negative-real reach of its region).
pub const RK4_COURANT_LIMIT: f64 = 1.39;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    OpenLoop,
    StateFeedback,
    OutputFeedback,
}

/// Where the sampled noise enters the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoisePlacement {
    /// Added to the two channels of `Y` directly.
    Output,
    /// Added to the lateral velocity and yaw rate before the kinematic map:
    /// `Y = H (A2 (X + n) + G2 U)`.
    #[default]
    Kinematic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub std: [f64; 2],
    pub sample_time: [f64; 2],
    pub placement: NoisePlacement,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            std: [0.5, 0.1],
            sample_time: [0.01, 0.005],
            placement: NoisePlacement::Kinematic,
        }
    }
}

/// Which steering signal the observer's output prediction uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObserverInput {
    /// The command issued by the controller at the current step.
    Commanded,
    /// The delayed command actually reaching the wheels.
    #[default]
    Applied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub delay_u: f64,
    pub noise: NoiseConfig,
    pub mode: Mode,
    pub observer_input: ObserverInput,
    pub x0: [f64; 2],
    /// Uniform bristle deflection on `(0, 1]`.
    pub z0: [f64; 2],
    pub x_hat0: [f64; 2],
    pub z_hat0: [f64; 2],
    /// Steering held in open loop.
    pub open_loop_input: [f64; 2],
    /// Logging period (s); rounded to a whole number of steps.
    pub log_interval: f64,
    pub max_snapshots: usize,
    /// Runs abort once `|(X, z)|` exceeds this.
    pub divergence_norm: f64,
    /// Start of the window used for `max_x_norm_after_settle`.
    pub settle_time: f64,
    /// Width of the trailing window for averaged forces.
    pub tail_window: f64,
    /// Relative level for the observer convergence time.
    pub observer_tol: f64,
    /// `|X - X*|` at the end below which a run counts as stable.
    pub stable_tol: f64,
    /// Courant number above which a configuration is rejected.
    pub courant_limit: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            dt: 2.5e-5,
            scheme: Scheme::Rk4,
            seed: 0,
            delay_u: 0.0,
            noise: NoiseConfig::default(),
            mode: Mode::OpenLoop,
            observer_input: ObserverInput::Applied,
            x0: [1.5, -0.25],
            z0: [0.003, 0.003],
            x_hat0: [0.0, 0.0],
            z_hat0: [0.0, 0.0],
            open_loop_input: [0.0, 0.0],
            log_interval: 1e-2,
            max_snapshots: 500,
            divergence_norm: 10.0,
            settle_time: 3.0,
            tail_window: 2.0,
            observer_tol: 0.05,
            stable_tol: 0.2,
            courant_limit: None,
        }
    }
}

impl SimConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn delay_steps(&self) -> usize {
        (self.delay_u / self.dt).round() as usize
    }

    pub fn log_every(&self) -> usize {
        ((self.log_interval / self.dt).round() as usize).max(1)
    }

    /// `dt max(Lambda) / dxi`
    pub fn courant(&self, plant: &Plant) -> f64 {
        let lam = plant.vehicle.mats.lambda;
        self.dt * lam[(0, 0)].max(lam[(1, 1)]) / plant.grid.dxi()
    }

    pub fn validate(&self, plant: &Plant) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("sim.dt", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("sim.t_end", "must be positive"));
        }
        if !(self.delay_u >= 0.0 && self.delay_u.is_finite()) {
            return Err(invalid("sim.delay_u", "must be non-negative"));
        }
        if self.noise.enabled {
            for i in 0..2 {
                if !(self.noise.std[i] >= 0.0) {
                    return Err(invalid("noise.std", "must be non-negative"));
                }
                if !(self.noise.sample_time[i] > 0.0) {
                    return Err(invalid("noise.sample_time", "must be positive"));
                }
            }
        }
        if !(self.divergence_norm > 0.0) {
            return Err(invalid("sim.divergence_norm", "must be positive"));
        }
        let limit = self.courant_limit.unwrap_or(match self.scheme {
            Scheme::Euler => 1.0,
            Scheme::Rk4 => RK4_COURANT_LIMIT,
        });
        let c = self.courant(plant);
        if c > limit {
            return Err(invalid(
                "sim.dt",
                format!(
                    "Courant number {c:.3} exceeds {limit:.3} for {:?}; use dt <= {:.3e}",
                    self.scheme,
                    self.dt * limit / c
                ),
            ));
        }
        Ok(())
    }
}

/// FIFO of past commands; zero length is a pass-through.
#[derive(Debug, Clone)]
pub struct DelayLine {
    buf: VecDeque<Steering>,
}

impl DelayLine {
    pub fn new(steps: usize, fill: Steering) -> Self {
        Self {
            buf: std::iter::repeat_n(fill, steps).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Pushes the current command and returns the one issued `len` steps ago.
    pub fn push(&mut self, u: Steering) -> Steering {
        if self.buf.is_empty() {
            return u;
        }
        self.buf.push_back(u);
        self.buf.pop_front().expect("non-empty")
    }
}

/// Zero-order-hold Gaussian noise refreshed every `period` steps.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    dist: Option<Normal<f64>>,
    period: usize,
    held: f64,
}

impl NoiseChannel {
    pub fn new(std: f64, sample_time: f64, dt: f64) -> Result<Self> {
        let dist = if std > 0.0 {
            Some(Normal::new(0.0, std).map_err(|e| invalid("noise.std", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            dist,
            period: ((sample_time / dt).round() as usize).max(1),
            held: 0.0,
        })
    }

    pub fn silent() -> Self {
        Self {
            dist: None,
            period: 1,
            held: 0.0,
        }
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn held(&self) -> f64 {
        self.held
    }

    /// Redraws when `step` falls on the sampling grid.
    pub fn update(&mut self, step: usize, rng: &mut ChaCha8Rng) -> f64 {
        if let Some(d) = &self.dist {
            if step.is_multiple_of(self.period) {
                self.held = d.sample(rng);
            }
        }
        self.held
    }
}

/// One logged row.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: [f64; 2],
    pub x_hat: [f64; 2],
    pub forces: [f64; 2],
    pub u_cmd: [f64; 2],
    pub u_applied: [f64; 2],
    pub y: [f64; 2],
    pub norm: f64,
    pub norm_hat: f64,
    pub v1: f64,
    pub v2: f64,
    pub v: f64,
    pub v0: f64,
}

impl TraceRow {
    pub const HEADER: &'static str =
        "t,vy,r,vy_hat,r_hat,fy1,fy2,delta1_cmd,delta2_cmd,delta1_applied,delta2_applied,y1,y2,norm,norm_hat,v1,v2,v,v0";

    pub fn csv(&self) -> String {
        let vals = [
            self.t,
            self.x[0],
            self.x[1],
            self.x_hat[0],
            self.x_hat[1],
            self.forces[0],
            self.forces[1],
            self.u_cmd[0],
            self.u_cmd[1],
            self.u_applied[0],
            self.u_applied[1],
            self.y[0],
            self.y[1],
            self.norm,
            self.norm_hat,
            self.v1,
            self.v2,
            self.v,
            self.v0,
        ];
        vals.iter().map(|v| format!("{v:.9e}")).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub z: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Stable,
    Bounded,
    Diverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub n_intervals: usize,
    pub delay_steps: usize,
    pub effective_delay: f64,
    pub steps_completed: usize,
    pub t_final: f64,
    pub outcome: Outcome,
    pub diverged: bool,
    pub divergence_time: Option<f64>,
    pub divergence_reason: Option<String>,
    pub max_norm: f64,
    pub max_norm_time: f64,
    pub terminal_norm: f64,
    pub terminal_x: [f64; 2],
    pub terminal_deviation: f64,
    pub max_x_norm_after_settle: Option<f64>,
    pub max_abs_steer_deg: [f64; 2],
    pub mean_forces_tail: Option<[f64; 2]>,
    pub convergence_time: Option<f64>,
    pub observer_error_initial: Option<f64>,
    pub observer_convergence_time: Option<f64>,
    pub snapshot_decimation: usize,
    pub log_decimation: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<Snapshot>,
    pub xi: Vec<f64>,
    pub summary: Summary,
}

impl SimTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 300);
        s.push_str(TraceRow::HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }
}

/// Everything a run needs besides its configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: Plant,
    pub controller: Option<ControllerGains>,
    pub observer: Option<Observer>,
    pub observer_constants: Option<ObserverConstants>,
    pub config: SimConfig,
}

/// Joint plant/observer state with the vector-space operations RK needs.
#[derive(Debug, Clone)]
struct Joint {
    x: Vector2<f64>,
    z: DistributedField,
    xh: Vector2<f64>,
    zh: DistributedField,
}

impl Joint {
    fn zeros(n: usize) -> Self {
        Self {
            x: Vector2::zeros(),
            z: DistributedField::zeros(n),
            xh: Vector2::zeros(),
            zh: DistributedField::zeros(n),
        }
    }

    fn copy_from(&mut self, o: &Self) {
        self.x = o.x;
        self.z.copy_from(&o.z);
        self.xh = o.xh;
        self.zh.copy_from(&o.zh);
    }

    fn axpy(&mut self, a: f64, o: &Self) {
        self.x += a * o.x;
        self.z.axpy(a, &o.z);
        self.xh += a * o.xh;
        self.zh.axpy(a, &o.zh);
    }

    fn pin(&mut self) {
        self.z.pin_inflow();
        self.zh.pin_inflow();
    }

    fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.xh.iter().all(|v| v.is_finite())
            && self.z.is_finite()
            && self.zh.is_finite()
    }
}

struct Inputs {
    u_applied: Steering,
    u_cmd: Steering,
    noise: Vector2<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.config.validate(&self.plant)?;
        match self.config.mode {
            Mode::OpenLoop => {}
            Mode::StateFeedback => {
                if self.controller.is_none() {
                    return Err(invalid("controller", "state feedback needs controller gains"));
                }
            }
            Mode::OutputFeedback => {
                if self.controller.is_none() || self.observer.is_none() {
                    return Err(invalid("observer", "output feedback needs controller and observer"));
                }
            }
        }
        Ok(())
    }

    fn rhs(&self, s: &Joint, inp: &Inputs, out: &mut Joint) -> Result<()> {
        let p = &self.plant;
        let mats = &p.vehicle.mats;
        let forces = p.tire_forces(&s.z)?;
        out.x = p.lumped_rhs(&s.x, &forces);
        let v = p.vehicle.rel_velocity(&s.x, &inp.u_applied);
        let hv = mats.h * v;
        p.transport_rhs_into(&s.z, &v, &hv, &mut out.z)?;
        if let Some(obs) = &self.observer {
            let y = hv + inp.noise;
            obs.rhs_into(p, &s.xh, &s.zh, &y, &inp.u_cmd, &mut out.xh, &mut out.zh)?;
        }
        Ok(())
    }

    fn command(&self, s: &Joint) -> Steering {
        let p = &self.plant;
        match (self.config.mode, &self.controller) {
            (Mode::StateFeedback, Some(c)) => c.state_feedback(p, &s.x, &s.z).u,
            (Mode::OutputFeedback, Some(c)) => c.output_feedback(p, &s.xh, &s.zh).u,
            _ => Vector2::from(self.config.open_loop_input),
        }
    }

    fn target(&self) -> LumpedState {
        self.controller.as_ref().map(|c| c.eq.x()).unwrap_or_else(Vector2::zeros)
    }

    fn initial(&self) -> Joint {
        let cfg = &self.config;
        let g = &self.plant.grid;
        Joint {
            x: Vector2::from(cfg.x0),
            z: DistributedField::constant_state(g, Vector2::from(cfg.z0)),
            xh: Vector2::from(cfg.x_hat0),
            zh: DistributedField::constant_state(g, Vector2::from(cfg.z_hat0)),
        }
    }

    /// Integrates the scenario, returning the (possibly partial) trace.
    pub fn run(&self) -> Result<SimTrace> {
        self.validate()?;
        let cfg = &self.config;
        let p = &self.plant;
        let g = &p.grid;
        let n = p.n_nodes();
        let dt = cfg.dt;
        let n_steps = cfg.n_steps();
        let log_every = cfg.log_every();
        let snap_every = (n_steps / cfg.max_snapshots.max(1)).max(1);
        let has_obs = self.observer.is_some();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut noise = if cfg.noise.enabled {
            [
                NoiseChannel::new(cfg.noise.std[0], cfg.noise.sample_time[0], dt)?,
                NoiseChannel::new(cfg.noise.std[1], cfg.noise.sample_time[1], dt)?,
            ]
        } else {
            [NoiseChannel::silent(), NoiseChannel::silent()]
        };

        let u_fill = match (&self.controller, cfg.mode) {
            (Some(c), Mode::StateFeedback | Mode::OutputFeedback) => c.eq.u(),
            _ => Vector2::from(cfg.open_loop_input),
        };
        let mut delay = DelayLine::new(cfg.delay_steps(), u_fill);
        let x_target = self.target();
        let ln_gamma = self.controller.as_ref().map(|c| c.gamma1);

        let mut s = self.initial();
        s.pin();
        let mut tmp = Joint::zeros(n);
        let mut k = [Joint::zeros(n), Joint::zeros(n), Joint::zeros(n), Joint::zeros(n)];

        let mut rows = Vec::with_capacity(n_steps / log_every + 2);
        let mut snaps = Vec::new();
        let mut max_norm = 0.0f64;
        let mut max_norm_time = 0.0;
        let mut max_steer = [0.0f64; 2];
        let mut tail_sum = Vector2::zeros();
        let mut tail_count = 0usize;
        let mut max_after_settle: Option<f64> = None;
        let mut last_outside: Option<f64> = Some(0.0);
        let obs_err0 = if has_obs { Some((s.x - s.xh).norm()) } else { None };
        let mut last_obs_outside: Option<f64> = Some(0.0);
        let mut divergence: Option<(f64, String)> = None;
        let mut steps_done = 0;
        let mut y_meas = Vector2::zeros();

        for step in 0..=n_steps {
            let t = step as f64 * dt;
            let norm = state_norm(&s.x, &s.z, g);
            if norm > max_norm {
                max_norm = norm;
                max_norm_time = t;
            }
            let dev = (s.x - x_target).norm();
            if dev > cfg.stable_tol {
                last_outside = Some(t);
            }
            if t >= cfg.settle_time - 0.5 * dt {
                let xn = s.x.norm();
                max_after_settle = Some(max_after_settle.map_or(xn, |m: f64| m.max(xn)));
            }
            if let Some(e0) = obs_err0 {
                if (s.x - s.xh).norm() >= cfg.observer_tol * e0 {
                    last_obs_outside = Some(t);
                }
            }
            let forces = p.tire_forces(&s.z)?;
            if t >= cfg.t_end - cfg.tail_window - 0.5 * dt {
                tail_sum += forces;
                tail_count += 1;
            }

            if !s.is_finite() || norm > cfg.divergence_norm {
                let reason = if s.is_finite() {
                    format!("state norm {norm:.3e} exceeded {}", cfg.divergence_norm)
                } else {
                    "non-finite state".to_string()
                };
                divergence = Some((t, reason));
                steps_done = step;
                break;
            }

            let raw = Vector2::new(noise[0].update(step, &mut rng), noise[1].update(step, &mut rng));
            let nz = match cfg.noise.placement {
                NoisePlacement::Output => raw,
                NoisePlacement::Kinematic => p.vehicle.mats.h * p.vehicle.mats.a2 * raw,
            };
            let u_cmd = self.command(&s);
            let u_app = delay.push(u_cmd);
            for i in 0..2 {
                max_steer[i] = max_steer[i].max(u_cmd[i].abs().to_degrees());
            }
            y_meas = p.vehicle.mats.h * p.vehicle.rel_velocity(&s.x, &u_app) + nz;

            if step % log_every == 0 {
                rows.push(self.log_row(t, &s, &forces, &u_cmd, &u_app, &y_meas, norm, ln_gamma));
            }
            if step % snap_every == 0 && snaps.len() < cfg.max_snapshots {
                snaps.push(Snapshot {
                    t,
                    z: s.z.values().iter().map(|v| [v[0], v[1]]).collect(),
                });
            }
            if step == n_steps {
                steps_done = n_steps;
                break;
            }

            let inp = Inputs {
                u_applied: u_app,
                u_cmd: match cfg.observer_input {
                    ObserverInput::Commanded => u_cmd,
                    ObserverInput::Applied => u_app,
                },
                noise: nz,
            };
            match cfg.scheme {
                Scheme::Euler => {
                    self.rhs(&s, &inp, &mut k[0])?;
                    s.axpy(dt, &k[0]);
                }
                Scheme::Rk4 => {
                    let [k1, k2, k3, k4] = &mut k;
                    self.rhs(&s, &inp, k1)?;
                    tmp.copy_from(&s);
                    tmp.axpy(0.5 * dt, k1);
                    self.rhs(&tmp, &inp, k2)?;
                    tmp.copy_from(&s);
                    tmp.axpy(0.5 * dt, k2);
                    self.rhs(&tmp, &inp, k3)?;
                    tmp.copy_from(&s);
                    tmp.axpy(dt, k3);
                    self.rhs(&tmp, &inp, k4)?;
                    s.axpy(dt / 6.0, k1);
                    s.axpy(dt / 3.0, k2);
                    s.axpy(dt / 3.0, k3);
                    s.axpy(dt / 6.0, k4);
                }
            }
            s.pin();
        }
        let _ = y_meas;

        let t_final = steps_done as f64 * dt;
        let diverged = divergence.is_some();
        let terminal_deviation = (s.x - x_target).norm();
        let outcome = if diverged {
            Outcome::Diverged
        } else if terminal_deviation < cfg.stable_tol {
            Outcome::Stable
        } else {
            Outcome::Bounded
        };
        let converged_at = |last: Option<f64>| -> Option<f64> {
            match last {
                Some(tl) if tl >= t_final - 0.5 * dt => None,
                Some(tl) => Some(tl + dt),
                None => Some(0.0),
            }
        };
        let summary = Summary {
            mode: cfg.mode,
            seed: cfg.seed,
            dt,
            t_end: cfg.t_end,
            n_intervals: g.n_intervals(),
            delay_steps: delay.len(),
            effective_delay: delay.len() as f64 * dt,
            steps_completed: steps_done,
            t_final,
            outcome,
            diverged,
            divergence_time: divergence.as_ref().map(|d| d.0),
            divergence_reason: divergence.map(|d| d.1),
            max_norm,
            max_norm_time,
            terminal_norm: state_norm(&s.x, &s.z, g),
            terminal_x: [s.x[0], s.x[1]],
            terminal_deviation,
            max_x_norm_after_settle: if diverged { None } else { max_after_settle },
            max_abs_steer_deg: max_steer,
            mean_forces_tail: if diverged || tail_count == 0 {
                None
            } else {
                let m = tail_sum / tail_count as f64;
                Some([m[0], m[1]])
            },
            convergence_time: if diverged { None } else { converged_at(last_outside) },
            observer_error_initial: obs_err0,
            observer_convergence_time: if diverged || !has_obs {
                None
            } else {
                converged_at(last_obs_outside)
            },
            snapshot_decimation: snap_every,
            log_decimation: log_every,
        };
        Ok(SimTrace {
            rows,
            snapshots: snaps,
            xi: g.xi().to_vec(),
            summary,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn log_row(
        &self,
        t: f64,
        s: &Joint,
        forces: &Vector2<f64>,
        u_cmd: &Steering,
        u_app: &Steering,
        y: &Vector2<f64>,
        norm: f64,
        gamma1: Option<f64>,
    ) -> TraceRow {
        let p = &self.plant;
        let g = &p.grid;
        let (v1, v2, v, v0) = match (&self.controller, gamma1) {
            (Some(c), Some(g1)) => {
                let v1 = lyapunov_v1(&c.deviation(&s.x));
                let v2 = lyapunov_v2(&c.zeta(&s.x, &s.z), g, &p.kernels);
                let v0 = match &self.observer_constants {
                    Some(oc) if self.observer.is_some() => oc.v0(&(s.x - s.xh), &s.z.sub(&s.zh), p),
                    _ => 0.0,
                };
                let obs = match (&self.observer_constants, self.config.mode) {
                    (Some(oc), Mode::OutputFeedback) => Some((oc.gamma0, v0)),
                    _ => None,
                };
                (v1, v2, composite_v(v1, v2, g1, obs), v0)
            }
            _ => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        TraceRow {
            t,
            x: [s.x[0], s.x[1]],
            x_hat: [s.xh[0], s.xh[1]],
            forces: [forces[0], forces[1]],
            u_cmd: [u_cmd[0], u_cmd[1]],
            u_applied: [u_app[0], u_app[1]],
            y: [y[0], y[1]],
            norm,
            norm_hat: state_norm(&s.xh, &s.zh, g),
            v1,
            v2,
            v,
            v0,
        }
    }
}

/// Plant-only convenience wrapper used by tests and the passivity check.
pub fn integrate_open_loop(plant: &Plant, s0: &PlantState, u: &Steering, dt: f64, steps: usize) -> Result<PlantState> {
    let sc = Scenario {
        plant: plant.clone(),
        controller: None,
        observer: None,
        observer_constants: None,
        config: SimConfig {
            dt,
            t_end: dt * steps as f64,
            open_loop_input: [u[0], u[1]],
            divergence_norm: f64::INFINITY,
            courant_limit: Some(f64::INFINITY),
            ..SimConfig::default()
        },
    };
    let mut s = Joint {
        x: s0.x,
        z: s0.z.clone(),
        xh: Vector2::zeros(),
        zh: DistributedField::zeros(s0.z.len()),
    };
    let n = s.z.len();
    let mut tmp = Joint::zeros(n);
    let mut k = [Joint::zeros(n), Joint::zeros(n), Joint::zeros(n), Joint::zeros(n)];
    let inp = Inputs {
        u_applied: *u,
        u_cmd: *u,
        noise: Vector2::zeros(),
    };
    for _ in 0..steps {
        let [k1, k2, k3, k4] = &mut k;
        sc.rhs(&s, &inp, k1)?;
        tmp.copy_from(&s);
        tmp.axpy(0.5 * dt, k1);
        sc.rhs(&tmp, &inp, k2)?;
        tmp.copy_from(&s);
        tmp.axpy(0.5 * dt, k2);
        sc.rhs(&tmp, &inp, k3)?;
        tmp.copy_from(&s);
        tmp.axpy(dt, k3);
        sc.rhs(&tmp, &inp, k4)?;
        s.axpy(dt / 6.0, k1);
        s.axpy(dt / 3.0, k2);
        s.axpy(dt / 3.0, k3);
        s.axpy(dt / 6.0, k4);
        s.pin();
    }
    Ok(PlantState { x: s.x, z: s.z })
}
