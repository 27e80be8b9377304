//! Physical parameters of the single-track vehicle and its two tires, the
//! constant matrices of the state-space form, and the pointwise nonlinear
//! maps (friction source matrix and rigid relative velocity).

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{invalid, Result};

/// Lateral velocity and yaw rate `[v_y, r]`.
pub type LumpedState = Vector2<f64>;

/// Front and rear steering angles `[delta_1, delta_2]` in radians.
pub type Steering = Vector2<f64>;

/// Friction coefficient as a function of the rigid relative velocity.
#[derive(Clone)]
pub enum FrictionLaw {
    Constant(f64),
    /// Arbitrary law together with its lower bound `mu_min`.
    Custom {
        law: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        mu_min: f64,
    },
}

impl FrictionLaw {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            FrictionLaw::Constant(mu) => *mu,
            FrictionLaw::Custom { law, mu_min } => law(v).max(*mu_min),
        }
    }

    pub fn mu_min(&self) -> f64 {
        match self {
            FrictionLaw::Constant(mu) => *mu,
            FrictionLaw::Custom { mu_min, .. } => *mu_min,
        }
    }
}

impl fmt::Debug for FrictionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrictionLaw::Constant(mu) => f.debug_tuple("Constant").field(mu).finish(),
            FrictionLaw::Custom { mu_min, .. } => f
                .debug_struct("Custom")
                .field("mu_min", mu_min)
                .finish_non_exhaustive(),
        }
    }
}

impl Default for FrictionLaw {
    fn default() -> Self {
        FrictionLaw::Constant(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct AxleTireParams {
    /// Contact patch length (m).
    pub length: f64,
    /// Normalized micro-stiffness (1/m).
    pub sigma: f64,
    pub phi: f64,
    pub psi: f64,
    /// Pressure decay parameter.
    pub a: f64,
    /// Vertical load (N).
    pub fz: f64,
    pub mu: FrictionLaw,
}

impl AxleTireParams {
    /// Builds an axle with `psi = 1 - phi`.
    pub fn new(length: f64, sigma: f64, phi: f64, a: f64, fz: f64) -> Self {
        Self {
            length,
            sigma,
            phi,
            psi: 1.0 - phi,
            a,
            fz,
            mu: FrictionLaw::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("axle.length", self.length)?;
        positive("axle.sigma", self.sigma)?;
        positive("axle.fz", self.fz)?;
        positive("axle.a", self.a)?;
        positive("axle.mu_min", self.mu.mu_min())?;
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(invalid("axle.phi", format!("{} not in (0, 1]", self.phi)));
        }
        if !(0.0..1.0).contains(&self.psi) {
            return Err(invalid("axle.psi", format!("{} not in [0, 1)", self.psi)));
        }
        if ((self.phi + self.psi) - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "axle.psi",
                format!("phi + psi = {} (must equal 1)", self.phi + self.psi),
            ));
        }
        Ok(())
    }

    /// Normalization constant `a / (1 - exp(-a))` of the pressure profile.
    pub fn pressure_peak(&self) -> f64 {
        self.a / (1.0 - (-self.a).exp())
    }

    /// Nondimensional pressure `p(xi) = p0 exp(-a xi)`; integrates to one on `[0, 1]`.
    pub fn pressure(&self, xi: f64) -> f64 {
        debug_assert!((-1e-12..=1.0 + 1e-12).contains(&xi));
        self.pressure_peak() * (-self.a * xi).exp()
    }

    pub fn pressure_slope(&self, xi: f64) -> f64 {
        -self.a * self.pressure(xi)
    }
}

#[derive(Debug, Clone)]
pub struct VehicleBodyParams {
    pub m: f64,
    pub iz: f64,
    pub l1: f64,
    pub l2: f64,
    pub vx: f64,
    /// Lateral wind force (N).
    pub fw: f64,
    /// Wind force offset from the center of gravity (m).
    pub lw: f64,
    pub theta: f64,
    /// Regularization of the absolute value; zero means the exact `|v|`.
    pub eps: f64,
}

impl VehicleBodyParams {
    pub fn validate(&self) -> Result<()> {
        positive("vehicle.m", self.m)?;
        positive("vehicle.iz", self.iz)?;
        positive("vehicle.l1", self.l1)?;
        positive("vehicle.l2", self.l2)?;
        positive("vehicle.vx", self.vx)?;
        non_negative("vehicle.theta", self.theta)?;
        non_negative("vehicle.eps", self.eps)?;
        finite("vehicle.fw", self.fw)?;
        finite("vehicle.lw", self.lw)
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} is not finite")))
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be positive")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be non-negative")))
    }
}

/// Constant matrices of the ODE-PDE state-space form.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrices {
    pub a1: Matrix2<f64>,
    pub a2: Matrix2<f64>,
    pub g1: Matrix2<f64>,
    pub g2: Matrix2<f64>,
    pub h: Matrix2<f64>,
    pub lambda: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub g1_inv: Matrix2<f64>,
    pub g2_inv: Matrix2<f64>,
    pub h_inv: Matrix2<f64>,
}

pub fn build_matrices(body: &VehicleBodyParams, axles: &[AxleTireParams; 2]) -> Result<ModelMatrices> {
    body.validate()?;
    for axle in axles {
        axle.validate()?;
    }
    let VehicleBodyParams {
        m, iz, l1, l2, vx, fw, lw, ..
    } = *body;

    let a1 = Matrix2::new(0.0, -vx, 0.0, 0.0);
    let a2 = Matrix2::new(1.0, l1, 1.0, -l2);
    let g1 = -Matrix2::new(1.0 / m, 1.0 / m, l1 / iz, -l2 / iz);
    let g2 = -vx * Matrix2::identity();
    let h = Matrix2::from_diagonal(&Vector2::new(2.0 * axles[0].phi, 2.0 * axles[1].phi));
    let lambda = Matrix2::from_diagonal(&Vector2::new(vx / axles[0].length, vx / axles[1].length));
    let b = Vector2::new(fw / m, lw * fw / iz);

    let g1_inv = g1
        .try_inverse()
        .ok_or_else(|| invalid("vehicle", "G1 is singular"))?;
    let g2_inv = g2
        .try_inverse()
        .ok_or_else(|| invalid("vehicle.vx", "G2 is singular"))?;
    let h_inv = h.try_inverse().ok_or_else(|| invalid("axle.phi", "H is singular"))?;

    Ok(ModelMatrices {
        a1,
        a2,
        g1,
        g2,
        h,
        lambda,
        b,
        g1_inv,
        g2_inv,
        h_inv,
    })
}

/// Validated vehicle description: body, both axles and the derived matrices.
#[derive(Debug, Clone)]
pub struct Vehicle {
    pub body: VehicleBodyParams,
    pub axles: [AxleTireParams; 2],
    pub mats: ModelMatrices,
}

impl Vehicle {
    pub fn new(body: VehicleBodyParams, axles: [AxleTireParams; 2]) -> Result<Self> {
        let mats = build_matrices(&body, &axles)?;
        Ok(Self { body, axles, mats })
    }

    /// Parameter set used throughout the stabilization study: an oversteer
    /// vehicle at 50 m/s under a steady crosswind.
    pub fn reference() -> Self {
        let body = VehicleBodyParams {
            m: 1300.0,
            iz: 2000.0,
            l1: 1.4,
            l2: 1.0,
            vx: 50.0,
            fw: -500.0,
            lw: -0.3,
            theta: 1.0,
            eps: 0.0,
        };
        let axles = [
            AxleTireParams::new(0.11, 240.0, 0.92, 0.1, 2.66e3),
            AxleTireParams::new(0.09, 269.0, 0.92, 0.1, 3.72e3),
        ];
        Self::new(body, axles).expect("reference parameters are valid")
    }

    pub fn theta(&self) -> f64 {
        self.body.theta
    }

    /// Diagonal friction source matrix; entries are non-positive.
    pub fn sigma_matrix(&self, v: &Vector2<f64>) -> Matrix2<f64> {
        Matrix2::from_diagonal(&self.sigma_diag(v))
    }

    pub fn sigma_diag(&self, v: &Vector2<f64>) -> Vector2<f64> {
        let eps = self.body.eps;
        Vector2::from_fn(|i, _| {
            let axle = &self.axles[i];
            -axle.sigma * abs_eps(v[i], eps) / axle.mu.eval(v[i])
        })
    }

    /// Rigid relative velocity `v = A2 X + G2 U`.
    pub fn rel_velocity(&self, x: &LumpedState, u: &Steering) -> Vector2<f64> {
        self.mats.a2 * x + self.mats.g2 * u
    }

    /// Lipschitz constant of the source matrix for constant friction laws.
    pub fn sigma_lipschitz(&self) -> f64 {
        self.axles
            .iter()
            .map(|a| a.sigma / a.mu.mu_min())
            .fold(0.0, f64::max)
    }
}

/// Possibly regularized absolute value `sqrt(v^2 + eps)`.
pub fn abs_eps(v: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        (v * v + eps).sqrt()
    } else {
        v.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_matrices() {
        let veh = Vehicle::reference();
        let m = &veh.mats;
        assert_relative_eq!(m.lambda[(0, 0)], 454.545454, epsilon = 1e-5);
        assert_relative_eq!(m.lambda[(1, 1)], 555.555555, epsilon = 1e-5);
        assert_relative_eq!(m.b[0], -0.384615, epsilon = 1e-6);
        assert_relative_eq!(m.b[1], 0.075, epsilon = 1e-12);
        assert_eq!(m.a1, Matrix2::new(0.0, -50.0, 0.0, 0.0));
        assert_eq!(m.g2, -50.0 * Matrix2::identity());
        assert_relative_eq!(m.h[(0, 0)], 1.84);
        assert_relative_eq!(m.h[(1, 1)], 1.84);
        assert_relative_eq!(m.g1 * m.g1_inv, Matrix2::identity(), epsilon = 1e-12);
    }

    #[test]
    fn zero_wind_gives_zero_disturbance() {
        let mut veh = Vehicle::reference();
        veh.body.fw = 0.0;
        let mats = build_matrices(&veh.body, &veh.axles).unwrap();
        assert_eq!(mats.b, Vector2::zeros());
    }

    #[test]
    fn rejects_bad_parameters() {
        let veh = Vehicle::reference();
        let mut body = veh.body.clone();
        body.vx = 0.0;
        assert!(build_matrices(&body, &veh.axles).is_err());
        let mut body = veh.body.clone();
        body.m = -1.0;
        assert!(build_matrices(&body, &veh.axles).is_err());
        let mut axles = veh.axles.clone();
        axles[1].length = 0.0;
        assert!(build_matrices(&veh.body, &axles).is_err());
        let mut axles = veh.axles.clone();
        axles[0].psi = 0.1;
        assert!(build_matrices(&veh.body, &axles).is_err());
    }

    #[test]
    fn pressure_profile_values() {
        let axle = AxleTireParams::new(0.11, 240.0, 0.92, 0.1, 2660.0);
        assert_relative_eq!(axle.pressure(0.0), 1.050833, epsilon = 1e-6);
        assert_relative_eq!(axle.pressure(1.0), 0.950833, epsilon = 1e-6);
        // Simpson on a fine grid as an independent check of the normalization.
        let n = 10_000;
        let h = 1.0 / n as f64;
        let mut s = axle.pressure(0.0) + axle.pressure(1.0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * axle.pressure(k as f64 * h);
        }
        assert_relative_eq!(s * h / 3.0, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma_matrix_values() {
        let veh = Vehicle::reference();
        assert_eq!(veh.sigma_matrix(&Vector2::zeros()), Matrix2::zeros());
        let s = veh.sigma_matrix(&Vector2::new(1.0, 0.0));
        assert_relative_eq!(s, Matrix2::new(-240.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn sigma_is_smooth_when_regularized() {
        // Central slopes just either side of the origin: the kink of |v|
        // produces a jump of about 2 sigma / mu, the regularized law none.
        let jump = |eps: f64| {
            let mut veh = Vehicle::reference();
            veh.body.eps = eps;
            let f = |v: f64| veh.sigma_diag(&Vector2::new(v, v))[0];
            let (d, h) = (1e-6, 1e-8);
            let slope = |v: f64| (f(v + h) - f(v - h)) / (2.0 * h);
            (slope(d) - slope(-d)).abs()
        };
        assert!(jump(1e-2) < 1e-2, "{}", jump(1e-2));
        assert_relative_eq!(jump(0.0), 2.0 * 240.0, max_relative = 1e-4);
    }

    #[test]
    fn relative_velocity_matches_component_form() {
        let veh = Vehicle::reference();
        assert_eq!(veh.rel_velocity(&Vector2::zeros(), &Vector2::zeros()), Vector2::zeros());
        let v = veh.rel_velocity(&Vector2::new(1.0, 0.1), &Vector2::zeros());
        assert_relative_eq!(v, Vector2::new(1.14, 0.9), epsilon = 1e-12);
        let v = veh.rel_velocity(&Vector2::zeros(), &Vector2::new(0.01, 0.01));
        assert_relative_eq!(v, Vector2::new(-0.5, -0.5), epsilon = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sigma_non_positive_and_lipschitz(
                a in -20.0..20.0f64, b in -20.0..20.0f64,
                c in -20.0..20.0f64, d in -20.0..20.0f64,
            ) {
                let veh = Vehicle::reference();
                let v1 = Vector2::new(a, b);
                let v2 = Vector2::new(c, d);
                let s1 = veh.sigma_matrix(&v1);
                prop_assert!(s1[(0, 0)] <= 0.0 && s1[(1, 1)] <= 0.0);
                prop_assert_eq!(s1[(0, 1)], 0.0);
                let lhs = (s1 - veh.sigma_matrix(&v2)).norm();
                prop_assert!(lhs <= veh.sigma_lipschitz() * (v1 - v2).norm() + 1e-9);
            }
        }
    }
}
