//! Semidiscrete right-hand side of the vehicle/tire interconnection.

use nalgebra::Vector2;

use crate::error::Result;
use crate::field::{DistributedField, Grid, KernelSet};
use crate::model::{LumpedState, Steering, Vehicle};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: LumpedState,
    pub z: DistributedField,
}

impl PlantState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            x: Vector2::zeros(),
            z: DistributedField::zeros(grid.n_nodes()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.z.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// `H v(X, U)` (plus sensor noise when recorded by the simulator).
    pub y: Vector2<f64>,
    pub t: f64,
}

/// Vehicle parameters bound to a spatial grid and its sampled kernels.
#[derive(Debug, Clone)]
pub struct Plant {
    pub vehicle: Vehicle,
    pub grid: Grid,
    pub kernels: KernelSet,
}

impl Plant {
    pub fn new(vehicle: Vehicle, grid: Grid) -> Self {
        let kernels = KernelSet::new(&vehicle, &grid);
        Self {
            vehicle,
            grid,
            kernels,
        }
    }

    pub fn reference(n_intervals: usize) -> Result<Self> {
        Ok(Self::new(Vehicle::reference(), Grid::uniform(n_intervals)?))
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    /// `A1 X + G1 (K1 z) + b`
    pub fn ode_rhs(&self, s: &PlantState) -> Result<Vector2<f64>> {
        let f = self.tire_forces(&s.z)?;
        Ok(self.lumped_rhs(&s.x, &f))
    }

    pub(crate) fn lumped_rhs(&self, x: &LumpedState, forces: &Vector2<f64>) -> Vector2<f64> {
        let m = &self.vehicle.mats;
        m.a1 * x + m.g1 * forces + m.b
    }

    pub fn pde_rhs(&self, s: &PlantState, u: &Steering) -> Result<DistributedField> {
        let v = self.vehicle.rel_velocity(&s.x, u);
        let mut out = DistributedField::zeros(s.z.len());
        let forcing = self.vehicle.mats.h * v;
        self.transport_rhs_into(&s.z, &v, &forcing, &mut out)?;
        Ok(out)
    }

    /// Writes `-Lambda dz/dxi + theta Sigma(y) [z + K2 z] + K3 z + forcing`
    /// into `out`, with a zero derivative at the inflow node.
    pub fn transport_rhs_into(
        &self,
        z: &DistributedField,
        sigma_arg: &Vector2<f64>,
        forcing: &Vector2<f64>,
        out: &mut DistributedField,
    ) -> Result<()> {
        let k2 = self.kernels.k2_functional(z, &self.grid)?;
        let k3 = self.kernels.k3_functional(z, &self.grid)?;
        let src = self.vehicle.theta() * self.vehicle.sigma_diag(sigma_arg);
        let lam = Vector2::new(
            self.vehicle.mats.lambda[(0, 0)],
            self.vehicle.mats.lambda[(1, 1)],
        ) / self.grid.dxi();
        let constant = k3 + forcing + src.component_mul(&k2);
        let zv = z.values();
        let o = out.values_mut();
        o[0] = Vector2::zeros();
        for k in 1..zv.len() {
            o[k] = -lam.component_mul(&(zv[k] - zv[k - 1])) + src.component_mul(&zv[k]) + constant;
        }
        Ok(())
    }

    /// Axle lateral forces `[F_y1, F_y2]`.
    pub fn tire_forces(&self, z: &DistributedField) -> Result<Vector2<f64>> {
        self.kernels.k1_functional(z, &self.grid)
    }

    pub fn measure(&self, x: &LumpedState, u: &Steering, t: f64) -> Measurement {
        Measurement {
            y: self.vehicle.mats.h * self.vehicle.rel_velocity(x, u),
            t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear_no_carcass() -> Plant {
        let mut veh = Vehicle::reference();
        veh.body.theta = 0.0;
        for a in veh.axles.iter_mut() {
            a.psi = 0.0;
            a.phi = 1.0;
        }
        let veh = Vehicle::new(veh.body, veh.axles).unwrap();
        Plant::new(veh, Grid::uniform(50).unwrap())
    }

    #[test]
    fn ode_rhs_values() {
        let p = Plant::reference(50).unwrap();
        let s = PlantState::zeros(&p.grid);
        let d = p.ode_rhs(&s).unwrap();
        assert_relative_eq!(d, Vector2::new(-500.0 / 1300.0, 0.075), epsilon = 1e-12);

        let mut veh = Vehicle::reference();
        veh.body.fw = 0.0;
        let p0 = Plant::new(Vehicle::new(veh.body, veh.axles).unwrap(), Grid::uniform(50).unwrap());
        assert_eq!(p0.ode_rhs(&s).unwrap(), Vector2::zeros());
    }

    #[test]
    fn pde_rhs_zero_at_rest() {
        let p = Plant::reference(50).unwrap();
        let s = PlantState::zeros(&p.grid);
        let d = p.pde_rhs(&s, &Vector2::zeros()).unwrap();
        assert!(d.values().iter().all(|v| *v == Vector2::zeros()));
    }

    #[test]
    fn pde_rhs_pure_forcing() {
        // theta = 0, psi = 0 and phi = 0.92 would violate phi + psi = 1, so
        // keep phi = 0.92 with psi = 0.08 but zero z: only H v survives.
        let mut veh = Vehicle::reference();
        veh.body.theta = 0.0;
        let p = Plant::new(Vehicle::new(veh.body, veh.axles).unwrap(), Grid::uniform(50).unwrap());
        let mut s = PlantState::zeros(&p.grid);
        // v = [1, 1] from X = [1, 0] with U = 0.
        s.x = Vector2::new(1.0, 0.0);
        let d = p.pde_rhs(&s, &Vector2::zeros()).unwrap();
        assert_eq!(d.values()[0], Vector2::zeros());
        for v in &d.values()[1..] {
            assert_relative_eq!(*v, Vector2::new(1.84, 1.84), epsilon = 1e-12);
        }
    }

    #[test]
    fn measurement() {
        let p = Plant::reference(50).unwrap();
        assert_eq!(p.measure(&Vector2::zeros(), &Vector2::zeros(), 0.0).y, Vector2::zeros());
        let x = Vector2::new(1.0, 0.1);
        let m = p.measure(&x, &Vector2::zeros(), 0.0);
        assert_relative_eq!(m.y, Vector2::new(2.0976, 1.656), epsilon = 1e-12);
        let back = p.vehicle.mats.h_inv * m.y;
        assert_relative_eq!(back, p.vehicle.rel_velocity(&x, &Vector2::zeros()), epsilon = 1e-14);
    }

    #[test]
    fn transport_converges_to_explicit_profile() {
        // Brute-force ODE-in-xi oracle: Lambda dz/dxi = H vbar, z(0) = 0.
        let p = linear_no_carcass();
        let vbar = Vector2::new(0.4, -0.3);
        let mut s = PlantState::zeros(&p.grid);
        let dt = 1e-5;
        for _ in 0..20_000 {
            let v = p.vehicle.mats.h * vbar;
            let mut d = DistributedField::zeros(s.z.len());
            p.transport_rhs_into(&s.z, &vbar, &v, &mut d).unwrap();
            s.z.axpy(dt, &d);
        }
        let lam = p.vehicle.mats.lambda;
        for (k, xi) in p.grid.xi().iter().enumerate() {
            for i in 0..2 {
                let exact = 2.0 * vbar[i] / lam[(i, i)] * xi;
                assert_relative_eq!(s.z.values()[k][i], exact, epsilon = 1e-9);
            }
        }
    }
}
