//! Cascaded observer: output injection on the lumped ODE and an open-loop
//! copy of the transport PDE driven by the measured relative velocity.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{invalid, Error, Result};
use crate::field::{DistributedField, Grid};
use crate::model::{LumpedState, ModelMatrices, Steering};
use crate::plant::Plant;

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub x_hat: LumpedState,
    pub z_hat: DistributedField,
}

impl ObserverState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            x_hat: Vector2::zeros(),
            z_hat: DistributedField::zeros(grid.n_nodes()),
        }
    }
}

/// Which closed form to use for the injection gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainForm {
    /// `L1 = -(A1 + p I) A2^-1`; error poles at `-phi_i p` when `phi1 = phi2`.
    #[default]
    Direct,
    /// `L1 = -(A1 + p I) (H A2)^-1`; error matrix `-p I` for any `H`.
    Compensated,
}

/// `A1 + L1 H A2`
pub fn error_matrix(l1: &Matrix2<f64>, mats: &ModelMatrices) -> Matrix2<f64> {
    mats.a1 + l1 * mats.h * mats.a2
}

/// Largest real part of the eigenvalues of a real 2x2 matrix.
pub fn max_real_eig(a: &Matrix2<f64>) -> f64 {
    let tr = a.trace();
    let disc = tr * tr - 4.0 * a.determinant();
    if disc >= 0.0 {
        0.5 * (tr + disc.sqrt())
    } else {
        0.5 * tr
    }
}

pub fn gain_l1(p: f64, mats: &ModelMatrices, form: GainForm) -> Result<Matrix2<f64>> {
    if !p.is_finite() || p < 0.0 {
        return Err(invalid("observer.p", format!("{p} must be non-negative")));
    }
    let shifted = mats.a1 + p * Matrix2::identity();
    let inner = match form {
        GainForm::Direct => mats.a2,
        GainForm::Compensated => mats.h * mats.a2,
    };
    let inv = inner
        .try_inverse()
        .ok_or_else(|| Error::Singular("A2 is not invertible".into()))?;
    let l1 = -shifted * inv;
    let max_re = max_real_eig(&error_matrix(&l1, mats));
    if max_re >= 0.0 {
        return Err(Error::NotHurwitz { max_re });
    }
    Ok(l1)
}

/// Solves `A^T P + P A = -I` for a Hurwitz 2x2 `A`.
pub fn lyapunov_p(a: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    // Column-major vec(P): (I (x) A^T + A^T (x) I) vec(P) = -vec(I).
    let at = a.transpose();
    let mut k = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    if i == j {
                        k[(2 * i + r, 2 * j + c)] += at[(r, c)];
                    }
                    if r == c {
                        k[(2 * i + r, 2 * j + c)] += at[(i, j)];
                    }
                }
            }
        }
    }
    let rhs = Vector4::new(-1.0, 0.0, 0.0, -1.0);
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
    let p = Matrix2::new(sol[0], sol[2], sol[1], sol[3]);
    Ok(0.5 * (p + p.transpose()))
}

/// Observer gains and the associated quadratic error weight.
#[derive(Debug, Clone)]
pub struct Observer {
    pub p: f64,
    pub form: GainForm,
    pub l1: Matrix2<f64>,
    /// `A1 + L1 H A2`
    pub a_bar: Matrix2<f64>,
    /// Solution of `a_bar^T P + P a_bar = -I`.
    pub lyap: Matrix2<f64>,
}

impl Observer {
    pub fn new(p: f64, mats: &ModelMatrices, form: GainForm) -> Result<Self> {
        let l1 = gain_l1(p, mats, form)?;
        let a_bar = error_matrix(&l1, mats);
        let lyap = lyapunov_p(&a_bar)?;
        Ok(Self {
            p,
            form,
            l1,
            a_bar,
            lyap,
        })
    }

    /// Writes the observer time derivatives given the measured `y` and the
    /// commanded steering `u`.
    #[allow(clippy::too_many_arguments)]
    pub fn rhs_into(
        &self,
        plant: &Plant,
        x_hat: &LumpedState,
        z_hat: &DistributedField,
        y: &Vector2<f64>,
        u: &Steering,
        dx: &mut Vector2<f64>,
        dz: &mut DistributedField,
    ) -> Result<()> {
        let mats = &plant.vehicle.mats;
        let forces = plant.tire_forces(z_hat)?;
        let y_hat = mats.h * plant.vehicle.rel_velocity(x_hat, u);
        *dx = plant.lumped_rhs(x_hat, &forces) - self.l1 * (y - y_hat);
        let v_meas = mats.h_inv * y;
        plant.transport_rhs_into(z_hat, &v_meas, y, dz)
    }

    pub fn rhs(
        &self,
        plant: &Plant,
        o: &ObserverState,
        y: &Vector2<f64>,
        u: &Steering,
    ) -> Result<(Vector2<f64>, DistributedField)> {
        let mut dx = Vector2::zeros();
        let mut dz = DistributedField::zeros(o.z_hat.len());
        self.rhs_into(plant, &o.x_hat, &o.z_hat, y, u, &mut dx, &mut dz)?;
        Ok((dx, dz))
    }

    /// Quadratic lumped error weight `X~^T P X~`.
    pub fn lumped_error_energy(&self, x_err: &Vector2<f64>) -> f64 {
        x_err.dot(&(self.lyap * x_err))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Vehicle;
    use crate::plant::PlantState;
    use approx::assert_relative_eq;

    #[test]
    fn direct_gain_reference_values() {
        let veh = Vehicle::reference();
        let l1 = gain_l1(2.0, &veh.mats, GainForm::Direct).unwrap();
        assert_relative_eq!(l1, Matrix2::new(20.0, -22.0, -0.833333333, 0.833333333), epsilon = 1e-8);
        let abar = error_matrix(&l1, &veh.mats);
        // A1 nilpotent and H = 1.84 I: a_bar = A1 - 1.84 (A1 + p I).
        let expected = veh.mats.a1 - 1.84 * (veh.mats.a1 + 2.0 * Matrix2::identity());
        assert_relative_eq!(abar, expected, epsilon = 1e-10);
        assert_relative_eq!(abar.trace(), -2.0 * 1.84 * 2.0, epsilon = 1e-10);
        assert_relative_eq!(abar.determinant(), (1.84f64 * 2.0).powi(2), max_relative = 1e-10);
    }

    #[test]
    fn compensated_gain_places_poles_at_minus_p() {
        let mut veh = Vehicle::reference();
        veh.axles[1].phi = 0.8;
        veh.axles[1].psi = 0.2;
        let veh = Vehicle::new(veh.body, veh.axles).unwrap();
        let l1 = gain_l1(3.0, &veh.mats, GainForm::Compensated).unwrap();
        assert_relative_eq!(error_matrix(&l1, &veh.mats), -3.0 * Matrix2::identity(), epsilon = 1e-9);
    }

    #[test]
    fn forms_agree_up_to_scale_for_equal_phi() {
        let veh = Vehicle::reference();
        let d = gain_l1(6.0, &veh.mats, GainForm::Direct).unwrap();
        let c = gain_l1(6.0, &veh.mats, GainForm::Compensated).unwrap();
        assert_relative_eq!(d, 1.84 * c, max_relative = 1e-12);
    }

    #[test]
    fn zero_gain_is_rejected() {
        let veh = Vehicle::reference();
        assert!(matches!(
            gain_l1(0.0, &veh.mats, GainForm::Direct),
            Err(Error::NotHurwitz { .. })
        ));
        assert!(gain_l1(-1.0, &veh.mats, GainForm::Direct).is_err());
    }

    #[test]
    fn lyapunov_solution_checks() {
        for a in [
            Matrix2::new(-1.0, 0.0, 0.0, -2.0),
            Matrix2::new(-3.68, -92.0, 0.0, -3.68),
            Matrix2::new(-1.0, 5.0, -4.0, -0.5),
        ] {
            let p = lyapunov_p(&a).unwrap();
            assert_relative_eq!(a.transpose() * p + p * a, -Matrix2::identity(), epsilon = 1e-9);
            assert!(p.determinant() > 0.0 && p[(0, 0)] > 0.0);
        }
        let p = lyapunov_p(&Matrix2::new(-1.0, 0.0, 0.0, -2.0)).unwrap();
        assert_relative_eq!(p, Matrix2::new(0.5, 0.0, 0.0, 0.25), epsilon = 1e-14);
    }

    #[test]
    fn exact_estimate_reproduces_plant_rhs() {
        let plant = Plant::reference(50).unwrap();
        let obs = Observer::new(2.0, &plant.vehicle.mats, GainForm::Direct).unwrap();
        let mut s = PlantState::zeros(&plant.grid);
        s.x = Vector2::new(0.4, -0.07);
        s.z = DistributedField::from_fn(&plant.grid, |x| Vector2::new(1e-3 * x, -2e-3 * x * x));
        let u = Vector2::new(0.01, -0.004);
        let y = plant.measure(&s.x, &u, 0.0).y;
        let o = ObserverState {
            x_hat: s.x,
            z_hat: s.z.clone(),
        };
        let (dx, dz) = obs.rhs(&plant, &o, &y, &u).unwrap();
        assert_eq!(dx, plant.ode_rhs(&s).unwrap());
        assert_eq!(dz, plant.pde_rhs(&s, &u).unwrap());
    }

    #[test]
    fn pde_part_ignores_lumped_estimate() {
        let plant = Plant::reference(20).unwrap();
        let obs = Observer::new(2.0, &plant.vehicle.mats, GainForm::Direct).unwrap();
        let y = Vector2::new(0.3, -0.2);
        let u = Vector2::zeros();
        let mut o = ObserverState::zeros(&plant.grid);
        let (_, dz_a) = obs.rhs(&plant, &o, &y, &u).unwrap();
        o.x_hat = Vector2::new(12.0, -3.0);
        let (_, dz_b) = obs.rhs(&plant, &o, &y, &u).unwrap();
        assert_eq!(dz_a, dz_b);
    }
}
