//! Passivity-based backstepping laws around a solved equilibrium.
//!
//! The force functional `K1 z` is treated as a virtual input to the lumped
//! ODE; the distributed state is then shifted by `M(xi, v*)` times the
//! virtual law so that the remaining mismatch `zeta` obeys a strictly
//! dissipative transport equation. The steering input cancels the cross
//! terms that the dissipation alone cannot dominate.

use nalgebra::{Matrix2, Vector2};

use crate::equilibrium::{m_profile, spectral_norm, EquilibriumPoint, MProfile};
use crate::error::{invalid, Result};
use crate::field::{dissipativity_constant, DistributedField};
use crate::model::{LumpedState, Steering};
use crate::plant::Plant;

/// Gains and precomputed profiles for one target equilibrium.
#[derive(Debug, Clone)]
pub struct ControllerGains {
    pub q: f64,
    pub gamma1: f64,
    /// `A1 + q I`
    pub a1_star: Matrix2<f64>,
    /// Discrete dissipativity constant used in `gamma1`.
    pub omega_h: f64,
    /// `sup_xi ||M^T(xi) Q(xi)||`
    pub mt_q_sup: f64,
    pub psi: Matrix2<f64>,
    pub psi_inv: Matrix2<f64>,
    pub m: MProfile,
    pub eq: EquilibriumPoint,
    /// `G1^-1 A1*`
    g1_inv_a1s: Matrix2<f64>,
    /// `(G1^-1 A1* G1)^T`
    cross_t: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub u: Steering,
    pub u_delta: Steering,
}

impl ControllerGains {
    pub fn synthesize(plant: &Plant, eq: EquilibriumPoint, q: f64) -> Result<Self> {
        let omega_h = dissipativity_constant(&plant.vehicle, &plant.kernels, &plant.grid, None);
        Self::with_omega(plant, eq, q, omega_h)
    }

    /// Same as [`synthesize`](Self::synthesize) with a precomputed `omega_h`.
    pub fn with_omega(plant: &Plant, eq: EquilibriumPoint, q: f64, omega_h: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(invalid("controller.q", format!("{q} must be positive")));
        }
        if !(omega_h > 0.0) {
            return Err(invalid(
                "grid",
                format!("discrete operator is not strictly dissipative (omega_h = {omega_h:.3e})"),
            ));
        }
        let mats = &plant.vehicle.mats;
        let a1_star = mats.a1 + q * Matrix2::identity();
        let (m, psi) = m_profile(plant, &eq.v())?;
        let psi_inv = psi.try_inverse().expect("conditioning checked in m_profile");
        let g1_inv_a1s = mats.g1_inv * a1_star;
        let mt_q_sup = m.mt_q_sup(plant);
        let gamma1 = gamma1_formula(q, omega_h, spectral_norm(&g1_inv_a1s), mt_q_sup);
        let cross_t = (g1_inv_a1s * mats.g1).transpose();
        Ok(Self {
            q,
            gamma1,
            a1_star,
            omega_h,
            mt_q_sup,
            psi,
            psi_inv,
            m,
            eq,
            g1_inv_a1s,
            cross_t,
        })
    }

    /// `varpi(X_delta) = -G1^-1 A1* X_delta`
    pub fn virtual_law(&self, x_delta: &Vector2<f64>) -> Vector2<f64> {
        -self.g1_inv_a1s * x_delta
    }

    /// Time derivative of the virtual law along the closed ODE,
    /// `-G1^-1 A1* (G1 Z - q X_delta)`.
    pub fn virtual_law_rate(&self, plant: &Plant, x_delta: &Vector2<f64>, z_aux: &Vector2<f64>) -> Vector2<f64> {
        -self.g1_inv_a1s * (plant.vehicle.mats.g1 * z_aux - self.q * x_delta)
    }

    /// `Z = K1 z_delta - varpi(X_delta)`
    pub fn z_functional(&self, plant: &Plant, z_delta: &DistributedField, x_delta: &Vector2<f64>) -> Result<Vector2<f64>> {
        Ok(plant.tire_forces(z_delta)? - self.virtual_law(x_delta))
    }

    /// `Z_M = int M^T Q zeta`
    pub fn zm_functional(&self, plant: &Plant, zeta: &DistributedField) -> Vector2<f64> {
        plant
            .grid
            .weights()
            .iter()
            .zip(&self.m.nodes)
            .zip(plant.kernels.q.iter().zip(zeta.values()))
            .fold(Vector2::zeros(), |acc, ((w, m), (q, v))| {
                acc + *w * m.transpose() * q.component_mul(v)
            })
    }

    pub fn deviation(&self, x: &LumpedState) -> Vector2<f64> {
        x - self.eq.x()
    }

    /// Backstepping coordinate `zeta = (z - z*) - M varpi(X - X*)`.
    pub fn zeta(&self, x: &LumpedState, z: &DistributedField) -> DistributedField {
        let w = self.virtual_law(&self.deviation(x));
        let mut out = z.sub(&self.eq.z_star);
        for (o, m) in out.values_mut().iter_mut().zip(&self.m.nodes) {
            *o -= m * w;
        }
        out
    }

    /// Steering command for a (true or estimated) state.
    pub fn control(&self, plant: &Plant, x: &LumpedState, z: &DistributedField) -> ControlCommand {
        let mats = &plant.vehicle.mats;
        let x_delta = self.deviation(x);
        let w = self.virtual_law(&x_delta);
        let zeta = self.zeta(x, z);
        let zm = self.zm_functional(plant, &zeta);
        let u_delta = -mats.g2_inv * (self.cross_t * zm + self.gamma1 * mats.g1.transpose() * x_delta)
            - mats.g2_inv * (mats.a2 * x_delta - self.psi_inv * w);
        ControlCommand {
            u: self.eq.u() + u_delta,
            u_delta,
        }
    }

    pub fn state_feedback(&self, plant: &Plant, x: &LumpedState, z: &DistributedField) -> ControlCommand {
        self.control(plant, x, z)
    }

    pub fn output_feedback(&self, plant: &Plant, x_hat: &LumpedState, z_hat: &DistributedField) -> ControlCommand {
        self.control(plant, x_hat, z_hat)
    }
}

/// `gamma1 = (q / omega) ||G1^-1 A1*||^2 ||M^T Q||_inf^2`
pub fn gamma1_formula(q: f64, omega: f64, g1_inv_a1s_norm: f64, mt_q_sup: f64) -> f64 {
    q / omega * g1_inv_a1s_norm.powi(2) * mt_q_sup.powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_equilibrium, EquilibriumTarget};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup() -> (Plant, ControllerGains) {
        let plant = Plant::reference(50).unwrap();
        let eq = solve_equilibrium(&plant, EquilibriumTarget::State(Vector2::zeros())).unwrap();
        let gains = ControllerGains::synthesize(&plant, eq, 2.0).unwrap();
        (plant, gains)
    }

    fn random_field(plant: &Plant, seed: f64) -> DistributedField {
        let mut f = DistributedField::from_fn(&plant.grid, |x| {
            Vector2::new(1e-3 * (seed + 7.0 * x).sin(), 1e-3 * (2.0 * seed - 3.0 * x).cos())
        });
        f.pin_inflow();
        f
    }

    #[test]
    fn rejects_non_positive_gain() {
        let (plant, g) = setup();
        assert!(ControllerGains::synthesize(&plant, g.eq.clone(), 0.0).is_err());
    }

    #[test]
    fn virtual_law_shapes_the_ode() {
        let (plant, g) = setup();
        assert_eq!(g.virtual_law(&Vector2::zeros()), Vector2::zeros());
        let m = &plant.vehicle.mats;
        let xd = Vector2::new(1.0, 0.0);
        let w = g.virtual_law(&xd);
        assert_relative_eq!(m.a1 * xd + m.g1 * w, -2.0 * xd, epsilon = 1e-9);
    }

    #[test]
    fn command_at_equilibrium_is_trim() {
        let (plant, g) = setup();
        let c = g.state_feedback(&plant, &g.eq.x(), &g.eq.z_star);
        assert_relative_eq!(c.u, g.eq.u(), epsilon = 1e-15);
        assert_relative_eq!(c.u_delta, Vector2::zeros(), epsilon = 1e-15);
        let z = g.z_functional(&plant, &DistributedField::zeros(51), &Vector2::zeros()).unwrap();
        assert_eq!(z, Vector2::zeros());
    }

    #[test]
    fn output_feedback_matches_state_feedback_for_exact_estimates() {
        let (plant, g) = setup();
        let x = Vector2::new(0.3, -0.05);
        let z = random_field(&plant, 0.4);
        assert_eq!(g.state_feedback(&plant, &x, &z), g.output_feedback(&plant, &x, &z));
    }

    #[test]
    fn zeta_carries_the_auxiliary_variable() {
        let (plant, g) = setup();
        let x = Vector2::new(0.7, 0.1);
        let z = random_field(&plant, 1.1);
        let zeta = g.zeta(&x, &z);
        let aux = g
            .z_functional(&plant, &z.sub(&g.eq.z_star), &g.deviation(&x))
            .unwrap();
        assert_relative_eq!(plant.tire_forces(&zeta).unwrap(), aux, max_relative = 1e-9, epsilon = 1e-9);
    }

    #[test]
    fn zm_of_shaped_field() {
        // Brute-force: explicit double loop over nodes with scalar arithmetic.
        let (plant, g) = setup();
        let c = Vector2::new(150.0, -80.0);
        let zeta = g.m.apply(&c);
        let zm = g.zm_functional(&plant, &zeta);
        let mut expected = Vector2::zeros();
        for k in 0..plant.n_nodes() {
            let w = plant.grid.weights()[k];
            let m = g.m.nodes[k];
            let q = plant.kernels.q[k];
            for r in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        expected[r] += w * m[(s, r)] * q[s] * m[(s, t)] * c[t];
                    }
                }
            }
        }
        assert_relative_eq!(zm, expected, max_relative = 1e-12);
        assert_eq!(g.zm_functional(&plant, &DistributedField::zeros(51)), Vector2::zeros());
    }

    #[test]
    fn gamma1_matches_independent_norms() {
        let (plant, g) = setup();
        let m = &plant.vehicle.mats;
        // Spectral norm of a 2x2 via the eigenvalues of B^T B.
        let b = m.g1_inv * (m.a1 + 2.0 * Matrix2::<f64>::identity());
        let btb = b.transpose() * b;
        let tr = btb.trace();
        let det = btb.determinant();
        let lmax = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        let expected = 2.0 / g.omega_h * lmax * g.mt_q_sup.powi(2);
        assert_relative_eq!(g.gamma1, expected, max_relative = 1e-9);
        assert!(g.gamma1 > 0.0);
    }

    proptest! {
        #[test]
        fn backstepping_identities(a in -3.0..3.0f64, b in -1.0..1.0f64, s in 0.0..6.0f64) {
            let (plant, g) = setup();
            let m = &plant.vehicle.mats;
            let x = Vector2::new(a, b);
            let z = random_field(&plant, s);
            let xd = g.deviation(&x);
            let aux = g.z_functional(&plant, &z.sub(&g.eq.z_star), &xd).unwrap();
            let zeta = g.zeta(&x, &z);
            let w = g.virtual_law(&xd);
            // Closed ODE: A1 Xd + G1 [Z + varpi] = -q Xd + G1 (K1 zeta).
            let lhs = m.a1 * xd + m.g1 * (aux + w);
            let rhs = -g.q * xd + m.g1 * plant.tire_forces(&zeta).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
            // Chain rule for the virtual law rate.
            let xdot = -g.q * xd + m.g1 * aux;
            let chain = -g.g1_inv_a1s * xdot;
            let closed = g.virtual_law_rate(&plant, &xd, &aux);
            prop_assert!((chain - closed).norm() <= 1e-9 * (1.0 + chain.norm()));
            // Cauchy-Schwarz bound on Z_M.
            let zm = g.zm_functional(&plant, &zeta);
            prop_assert!(zm.norm() <= g.mt_q_sup * zeta.l2_norm(&plant.grid) * (1.0 + 1e-12));
        }
    }
}
