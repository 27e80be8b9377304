//! Lyapunov functionals, state norms and numerical certificates.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controller::ControllerGains;
use crate::equilibrium::{m_profile, rhs_residual, solve_equilibrium, spectral_norm, EquilibriumTarget};
use crate::error::Result;
use crate::field::{dissipativity_constant, DistributedField, Grid, KernelSet};
use crate::model::Vehicle;
use crate::observer::{max_real_eig, GainForm, Observer};
use crate::plant::{Plant, PlantState};

/// `V1 = |X_delta|^2 / 2`
pub fn lyapunov_v1(x_delta: &Vector2<f64>) -> f64 {
    0.5 * x_delta.norm_squared()
}

/// `V2 = 1/2 int zeta^T Q zeta`
pub fn lyapunov_v2(zeta: &DistributedField, grid: &Grid, kernels: &KernelSet) -> f64 {
    0.5 * kernels.q_inner(zeta, zeta, grid)
}

/// `sqrt(|X|^2 + |z|_{L2}^2)`
pub fn state_norm(x: &Vector2<f64>, z: &DistributedField, grid: &Grid) -> f64 {
    (x.norm_squared() + z.l2_norm_sq(grid)).sqrt()
}

/// Operator norm of `K1` from weighted `L2` into `R^2`.
pub fn k1_operator_norm(kernels: &KernelSet, grid: &Grid) -> f64 {
    (0..2)
        .map(|i| {
            grid.weights()
                .iter()
                .zip(&kernels.k1)
                .map(|(w, k)| w * k[i] * k[i])
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Numerical stand-ins for the existence constants of the observer error
/// functional and the output-feedback composite.
///
/// `V0 = X~^T P X~ / 2 + phi/2 int z~^T Q z~` with `P` from the Lyapunov
/// equation of the error matrix. `phi` is the smallest weight that lets the
/// PDE dissipation dominate the force coupling; `rho` and `eta0` follow from
/// norm bounds on the discrete operators.
#[derive(Debug, Clone, Serialize)]
pub struct ObserverConstants {
    pub p: [[f64; 2]; 2],
    pub phi: f64,
    pub rho: f64,
    pub eta0: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    pub gamma0: f64,
    #[serde(skip)]
    p_mat: Matrix2<f64>,
}

impl ObserverConstants {
    pub fn compute(plant: &Plant, gains: &ControllerGains, observer: &Observer) -> Self {
        let mats = &plant.vehicle.mats;
        let omega = gains.omega_h;
        let p = observer.lyap;
        let lam = p.symmetric_eigenvalues();
        let (p_min, p_max) = (lam.min(), lam.max());
        let k1 = k1_operator_norm(&plant.kernels, &plant.grid);
        let q_max = plant.kernels.q_max();
        let q_min = plant.kernels.q_min();

        let pg1 = spectral_norm(&(p * mats.g1));
        let phi = 2.0 * (pg1 * k1).powi(2) / omega;
        let rho = (1.0 / (2.0 * p_max)).min(omega / q_max);

        // Cross terms: Z^T [a X~ + c K_M z~] with Z = K1 zeta.
        let g1a = mats.g1_inv * gains.a1_star;
        let cross = spectral_norm(&(g1a * mats.g1));
        let km_m = plant
            .grid
            .weights()
            .iter()
            .zip(&gains.m.nodes)
            .zip(&plant.kernels.q)
            .fold(Matrix2::zeros(), |acc, ((w, m), q)| {
                acc + *w * m.transpose() * Matrix2::from_diagonal(q) * m
            });
        let a = spectral_norm(&mats.a2)
            + spectral_norm(&(gains.psi_inv * g1a))
            + gains.gamma1 * spectral_norm(&mats.g1)
            + cross * spectral_norm(&km_m) * spectral_norm(&g1a);
        let c = cross * gains.mt_q_sup;
        let z_bound = k1 * (2.0 * gains.gamma1 / q_min).sqrt();
        let eta0 = z_bound * (a * (2.0 / p_min).sqrt() + c * (2.0 / (phi * q_min)).sqrt());

        let gamma2 = gains.q.min(omega / q_max);
        let epsilon = eta0 * eta0 / (gains.gamma1 * gamma2);
        let gamma0 = 2.0 * epsilon / (rho * gains.gamma1);
        Self {
            p: [[p[(0, 0)], p[(0, 1)]], [p[(1, 0)], p[(1, 1)]]],
            phi,
            rho,
            eta0,
            gamma2,
            epsilon,
            gamma0,
            p_mat: p,
        }
    }

    pub fn v0(&self, x_err: &Vector2<f64>, z_err: &DistributedField, plant: &Plant) -> f64 {
        0.5 * x_err.dot(&(self.p_mat * x_err)) + self.phi * lyapunov_v2(z_err, &plant.grid, &plant.kernels)
    }
}

/// `V1 + V2 / gamma1`, plus `gamma0 V0` when an observer term is supplied.
pub fn composite_v(v1: f64, v2: f64, gamma1: f64, observer_term: Option<(f64, f64)>) -> f64 {
    let base = v1 + v2 / gamma1;
    match observer_term {
        Some((gamma0, v0)) => gamma0 * v0 + base,
        None => base,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub detail: String,
}

/// Settings for [`certify`].
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub passivity_trials: usize,
    pub passivity_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub observer_p: f64,
    pub gain_form: GainForm,
    pub normalization_tol: f64,
    pub equilibrium_tol: f64,
    /// Constant `C` in the admissible passivity defect `-C (dt + dxi)`.
    pub passivity_c: f64,
    pub target: EquilibriumTarget,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            passivity_trials: 100,
            passivity_steps: 2000,
            dt: 2.5e-5,
            seed: 7,
            observer_p: 2.0,
            gain_form: GainForm::Direct,
            normalization_tol: 1e-3,
            equilibrium_tol: 1e-8,
            passivity_c: 1.0,
            target: EquilibriumTarget::State(Vector2::zeros()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub n_intervals: usize,
    pub omega_h: f64,
    pub passivity_residual_min: f64,
    pub passivity_tolerance: f64,
    pub lemma1_norm_error: f64,
    pub equilibrium_residual: f64,
    pub hurwitz_margins: [f64; 2],
    pub sigma_lipschitz: f64,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

impl CertificationReport {
    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.verdict.passed()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("certification at N = {}\n", self.n_intervals);
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {:<28} value = {:>12.5e}  threshold = {:>12.5e}  {}\n",
                if c.verdict.passed() { "pass" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold,
                c.detail
            ));
        }
        s.push_str(if self.all_pass { "all checks pass\n" } else { "some checks failed\n" });
        s
    }
}

/// Strict passivity slack along one open-loop trajectory of the PDE driven
/// by a prescribed relative velocity:
/// `int F^T v - (S(T) - S(0)) - omega int |z|^2`, normalized by the
/// accumulated magnitude of the terms. Negative values indicate a violation.
pub fn passivity_residual(
    plant: &Plant,
    omega: f64,
    z0: &DistributedField,
    v_of_t: &dyn Fn(f64) -> Vector2<f64>,
    dt: f64,
    steps: usize,
) -> Result<f64> {
    let storage = |z: &DistributedField| lyapunov_v2(z, &plant.grid, &plant.kernels);
    let h = plant.vehicle.mats.h;
    let mut z = z0.clone();
    let s0 = storage(&z);
    let mut supply = 0.0;
    let mut scale = s0.abs();
    let n = z.len();
    let (mut k1, mut k2, mut k3, mut k4) = (
        DistributedField::zeros(n),
        DistributedField::zeros(n),
        DistributedField::zeros(n),
        DistributedField::zeros(n),
    );
    let mut tmp = DistributedField::zeros(n);
    let supply_rate = |z: &DistributedField, v: &Vector2<f64>| -> Result<f64> {
        let f = plant.tire_forces(z)?;
        Ok(f.dot(v) - omega * z.l2_norm_sq(&plant.grid))
    };
    for k in 0..steps {
        let t = k as f64 * dt;
        let stage = |z: &DistributedField, t: f64, out: &mut DistributedField| -> Result<()> {
            let v = v_of_t(t);
            plant.transport_rhs_into(z, &v, &(h * v), out)
        };
        stage(&z, t, &mut k1)?;
        tmp.copy_from(&z);
        tmp.axpy(0.5 * dt, &k1);
        stage(&tmp, t + 0.5 * dt, &mut k2)?;
        tmp.copy_from(&z);
        tmp.axpy(0.5 * dt, &k2);
        stage(&tmp, t + 0.5 * dt, &mut k3)?;
        tmp.copy_from(&z);
        tmp.axpy(dt, &k3);
        stage(&tmp, t + dt, &mut k4)?;
        // Simpson in time for the supply integral, consistent with RK4.
        let w0 = supply_rate(&z, &v_of_t(t))?;
        z.axpy(dt / 6.0, &k1);
        z.axpy(dt / 3.0, &k2);
        z.axpy(dt / 3.0, &k3);
        z.axpy(dt / 6.0, &k4);
        z.pin_inflow();
        let mut mid = z.clone();
        mid.axpy(-0.5 * dt, &k4);
        let wm = supply_rate(&mid, &v_of_t(t + 0.5 * dt))?;
        let w1 = supply_rate(&z, &v_of_t(t + dt))?;
        let inc = dt / 6.0 * (w0 + 4.0 * wm + w1);
        supply += inc;
        scale += inc.abs();
    }
    let balance = storage(&z) - s0 - supply;
    Ok(-balance / scale.max(f64::MIN_POSITIVE))
}

fn random_velocity_profile(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> Vector2<f64> {
    let amp = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let freq = Vector2::new(rng.random_range(0.5..30.0), rng.random_range(0.5..30.0));
    let phase = Vector2::new(rng.random_range(0.0..6.3), rng.random_range(0.0..6.3));
    let bias = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    move |t| Vector2::from_fn(|i, _| bias[i] + amp[i] * (freq[i] * t + phase[i]).sin())
}

/// Runs every numerical certificate at the given grid size.
pub fn certify(vehicle: &Vehicle, n_intervals: usize, opts: &CertifyOptions) -> Result<CertificationReport> {
    let grid = Grid::uniform(n_intervals)?;
    let plant = Plant::new(vehicle.clone(), grid);
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64, threshold: f64, ok: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            value,
            threshold,
            verdict: Verdict::from(ok),
            detail,
        })
    };

    let omega_h = dissipativity_constant(&plant.vehicle, &plant.kernels, &plant.grid, None);
    push(
        "dissipativity",
        omega_h,
        0.0,
        omega_h > 0.0,
        "discrete transport operator strictly dissipative in the Q-weighted inner product".into(),
    );

    // Equilibrium and normalization.
    let (lemma1, eq_res) = match solve_equilibrium(&plant, opts.target) {
        Ok(eq) => {
            let (m, _) = m_profile(&plant, &eq.v())?;
            let err = (m.k1_normalization(&plant) - Matrix2::identity()).norm();
            let (_, rel) = rhs_residual(&plant, &eq.plant_state(), &eq.u())?;
            (err, rel)
        }
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    push(
        "force normalization",
        lemma1,
        opts.normalization_tol,
        lemma1 <= opts.normalization_tol,
        "|K1 M - I|".into(),
    );
    push(
        "equilibrium residual",
        eq_res,
        opts.equilibrium_tol,
        eq_res < opts.equilibrium_tol,
        "relative residual of the semidiscrete right-hand side".into(),
    );

    // Observer error matrix.
    let (margins, hurwitz_detail) = match Observer::new(opts.observer_p, &plant.vehicle.mats, opts.gain_form) {
        Ok(o) => {
            let a = o.a_bar;
            let tr = a.trace();
            let disc = tr * tr - 4.0 * a.determinant();
            let m = if disc >= 0.0 {
                [0.5 * (tr + disc.sqrt()), 0.5 * (tr - disc.sqrt())]
            } else {
                [0.5 * tr, 0.5 * tr]
            };
            (m, format!("p = {}", opts.observer_p))
        }
        Err(e) => {
            let mats = &plant.vehicle.mats;
            let l1 = -(mats.a1 + opts.observer_p * Matrix2::identity())
                * mats.a2.try_inverse().unwrap_or_else(Matrix2::zeros);
            let re = max_real_eig(&crate::observer::error_matrix(&l1, mats));
            ([re, re], e.to_string())
        }
    };
    let max_re = margins[0].max(margins[1]);
    push("observer hurwitz", max_re, 0.0, max_re < 0.0, hurwitz_detail);

    // Lipschitz constant of the friction source, sampled.
    let lip_bound = plant.vehicle.sigma_lipschitz();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut lip_est: f64 = 0.0;
    for _ in 0..2000 {
        let a = Vector2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let b = a + Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let d = (a - b).norm();
        if d > 0.0 {
            let ratio = (plant.vehicle.sigma_diag(&a) - plant.vehicle.sigma_diag(&b)).norm() / d;
            lip_est = lip_est.max(ratio);
        }
    }
    push(
        "friction lipschitz",
        lip_est,
        lip_bound,
        lip_est <= lip_bound * (1.0 + 1e-9),
        "sampled slope of the friction source against its analytic bound".into(),
    );

    // Passivity on random trajectories.
    let tol = opts.passivity_c * (opts.dt + plant.grid.dxi());
    let mut worst = f64::INFINITY;
    for _ in 0..opts.passivity_trials {
        let amp = Vector2::new(rng.random_range(-5e-3..5e-3), rng.random_range(-5e-3..5e-3));
        let mut z0 = DistributedField::from_fn(&plant.grid, |x| amp * (3.0 * x).sin());
        z0.pin_inflow();
        let v = random_velocity_profile(&mut rng);
        let r = passivity_residual(&plant, omega_h, &z0, &v, opts.dt, opts.passivity_steps)?;
        worst = worst.min(r);
    }
    push(
        "passivity",
        worst,
        -tol,
        worst >= -tol,
        format!("{} random open-loop trajectories", opts.passivity_trials),
    );

    let all_pass = checks.iter().all(|c| c.verdict.passed());
    Ok(CertificationReport {
        n_intervals,
        omega_h,
        passivity_residual_min: worst,
        passivity_tolerance: tol,
        lemma1_norm_error: lemma1,
        equilibrium_residual: eq_res,
        hurwitz_margins: margins,
        sigma_lipschitz: lip_est,
        checks,
        all_pass,
    })
}

/// Convenience: the plant state norm of a [`PlantState`].
pub fn plant_norm(s: &PlantState, grid: &Grid) -> f64 {
    state_norm(&s.x, &s.z, grid)
}
