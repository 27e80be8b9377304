//! Steady states of the interconnection.
//!
//! For a frozen relative velocity `y` the distributed subsystem is linear,
//! so its steady response to the forcing `H y` is `-A_Sigma(y)^-1 H y` and
//! the resulting force is `Psi(y) y` with `Psi(y) = -K1 A_Sigma(y)^-1 H`.
//! Stationarity of the lumped ODE then reduces the whole problem to two
//! equations in the unknown relative velocity `v*`, solved by damped Newton.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{DiscreteOperator, DistributedField};
use crate::model::{LumpedState, Steering};
use crate::plant::{Plant, PlantState};

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 40;
const PSI_MAX_COND: f64 = 1e12;

/// Solves `A_Sigma(y) w = rhs` with `w(0) = 0`.
pub fn invert_a_sigma(plant: &Plant, y: &Vector2<f64>, rhs: &DistributedField) -> Result<DistributedField> {
    DiscreteOperator::new(&plant.vehicle, &plant.kernels, &plant.grid, Some(y)).solve(rhs)
}

/// Steady responses `A_Sigma(y)^-1 (H e_j)` for `j = 0, 1`.
fn unit_responses(plant: &Plant, y: &Vector2<f64>) -> Result<[DistributedField; 2]> {
    let op = DiscreteOperator::new(&plant.vehicle, &plant.kernels, &plant.grid, Some(y));
    let h = plant.vehicle.mats.h;
    let n = plant.n_nodes();
    let col = |j: usize| -> Result<DistributedField> {
        let hj = h.column(j).into_owned();
        let mut rhs = DistributedField::from_values(vec![hj; n]);
        rhs.pin_inflow();
        op.solve(&rhs)
    };
    Ok([col(0)?, col(1)?])
}

/// Steady-state input-to-force gain `Psi(y) = -(K1 A_Sigma(y)^-1 H)`.
pub fn psi_matrix(plant: &Plant, y: &Vector2<f64>) -> Result<Matrix2<f64>> {
    let [w0, w1] = unit_responses(plant, y)?;
    let c0 = -plant.tire_forces(&w0)?;
    let c1 = -plant.tire_forces(&w1)?;
    let psi = Matrix2::from_columns(&[c0, c1]);
    check_conditioning(&psi)?;
    Ok(psi)
}

fn check_conditioning(m: &Matrix2<f64>) -> Result<()> {
    let sv = m.singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > PSI_MAX_COND {
        return Err(Error::IllConditioned { cond });
    }
    Ok(())
}

/// Nodal samples of the matrix profile `M(xi, v*)`.
#[derive(Debug, Clone)]
pub struct MProfile {
    pub nodes: Vec<Matrix2<f64>>,
}

impl MProfile {
    /// `M(xi) c` as a field.
    pub fn apply(&self, c: &Vector2<f64>) -> DistributedField {
        DistributedField::from_values(self.nodes.iter().map(|m| m * c).collect())
    }

    /// Quadrature of `K1(xi) M(xi)`; equals the identity for an exact profile.
    pub fn k1_normalization(&self, plant: &Plant) -> Matrix2<f64> {
        plant
            .grid
            .weights()
            .iter()
            .zip(&plant.kernels.k1)
            .zip(&self.nodes)
            .fold(Matrix2::zeros(), |acc, ((w, k), m)| {
                acc + *w * Matrix2::from_diagonal(k) * m
            })
    }

    /// `sup_xi ||M(xi)^T Q(xi)||` (spectral norm per node).
    pub fn mt_q_sup(&self, plant: &Plant) -> f64 {
        self.nodes
            .iter()
            .zip(&plant.kernels.q)
            .map(|(m, q)| spectral_norm(&(m.transpose() * Matrix2::from_diagonal(q))))
            .fold(0.0, f64::max)
    }
}

pub fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    m.singular_values().max()
}

/// `M(xi, v*) = -(A_Sigma(v*)^-1 H)(xi) Psi(v*)^-1`.
pub fn m_profile(plant: &Plant, v_star: &Vector2<f64>) -> Result<(MProfile, Matrix2<f64>)> {
    let [w0, w1] = unit_responses(plant, v_star)?;
    let psi = Matrix2::from_columns(&[-plant.tire_forces(&w0)?, -plant.tire_forces(&w1)?]);
    check_conditioning(&psi)?;
    let psi_inv = psi
        .try_inverse()
        .ok_or_else(|| Error::Singular("Psi(v*) is not invertible".into()))?;
    let nodes = w0
        .values()
        .iter()
        .zip(w1.values())
        .map(|(a, b)| -Matrix2::from_columns(&[*a, *b]) * psi_inv)
        .collect();
    Ok((MProfile { nodes }, psi))
}

/// What is prescribed when looking for a steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquilibriumTarget {
    /// Prescribed lumped state; solve for the steering input.
    State(LumpedState),
    /// Prescribed steering; solve for the lumped state.
    Input(Steering),
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumPoint {
    pub x_star: [f64; 2],
    pub u_star: [f64; 2],
    pub v_star: [f64; 2],
    pub forces: [f64; 2],
    /// Max-norm of the full semidiscrete right-hand side, relative to the
    /// magnitude of its individual terms.
    pub residual: f64,
    pub residual_abs: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub z_star: DistributedField,
}

impl EquilibriumPoint {
    pub fn x(&self) -> LumpedState {
        Vector2::from(self.x_star)
    }

    pub fn u(&self) -> Steering {
        Vector2::from(self.u_star)
    }

    pub fn v(&self) -> Vector2<f64> {
        Vector2::from(self.v_star)
    }

    pub fn plant_state(&self) -> PlantState {
        PlantState {
            x: self.x(),
            z: self.z_star.clone(),
        }
    }
}

/// Damped Newton on the reduced unknown `v*`; see the module docs.
pub fn solve_equilibrium(plant: &Plant, target: EquilibriumTarget) -> Result<EquilibriumPoint> {
    let m = &plant.vehicle.mats;
    let a2_inv = m
        .a2
        .try_inverse()
        .ok_or_else(|| Error::Singular("A2 is not invertible".into()))?;

    let lumped_of = |v: &Vector2<f64>| -> LumpedState {
        match target {
            EquilibriumTarget::State(x) => x,
            EquilibriumTarget::Input(u) => a2_inv * (v - m.g2 * u),
        }
    };
    let residual = |v: &Vector2<f64>| -> Result<Vector2<f64>> {
        let psi = psi_matrix(plant, v)?;
        Ok(m.g1 * psi * v + m.a1 * lumped_of(v) + m.b)
    };

    let mut v = match target {
        EquilibriumTarget::State(x) => m.a2 * x,
        EquilibriumTarget::Input(u) => m.g2 * u,
    };
    let mut r = residual(&v)?;
    let mut iterations = 0;
    while r.norm() > NEWTON_TOL {
        if iterations >= NEWTON_MAX_ITER {
            return Err(Error::NoConvergence {
                iterations,
                residual: r.norm(),
            });
        }
        iterations += 1;
        let mut jac = Matrix2::zeros();
        for j in 0..2 {
            let h = 1e-7 * v[j].abs().max(1e-2);
            let mut vp = v;
            let mut vm = v;
            vp[j] += h;
            vm[j] -= h;
            let col = (residual(&vp)? - residual(&vm)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let step = jac
            .lu()
            .solve(&(-r))
            .ok_or_else(|| Error::Singular("singular Newton Jacobian".into()))?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = v + alpha * step;
            let rt = residual(&trial)?;
            if rt.norm() < r.norm() {
                v = trial;
                r = rt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations,
                residual: r.norm(),
            });
        }
    }

    let x_star = lumped_of(&v);
    let u_star = m.g2_inv * (v - m.a2 * x_star);
    let mut forcing = DistributedField::from_values(vec![m.h * v; plant.n_nodes()]);
    forcing.pin_inflow();
    let z_star = invert_a_sigma(plant, &v, &forcing)?.scaled(-1.0);
    let forces = plant.tire_forces(&z_star)?;

    let state = PlantState {
        x: x_star,
        z: z_star.clone(),
    };
    let (residual_abs, residual_rel) = rhs_residual(plant, &state, &u_star)?;

    Ok(EquilibriumPoint {
        x_star: x_star.into(),
        u_star: u_star.into(),
        v_star: v.into(),
        forces: forces.into(),
        residual: residual_rel,
        residual_abs,
        iterations,
        z_star,
    })
}

/// Absolute and relative max-norm of the semidiscrete right-hand side.
pub fn rhs_residual(plant: &Plant, s: &PlantState, u: &Steering) -> Result<(f64, f64)> {
    let m = &plant.vehicle.mats;
    let forces = plant.tire_forces(&s.z)?;
    let ode = plant.ode_rhs(s)?;
    let ode_scale = (m.a1 * s.x)
        .amax()
        .max((m.g1 * forces).amax())
        .max(m.b.amax());
    let pde = plant.pde_rhs(s, u)?;
    let pde_abs = pde.values().iter().map(|v| v.amax()).fold(0.0, f64::max);
    let v = plant.vehicle.rel_velocity(&s.x, u);
    let pde_scale = (m.h * v).amax();
    let abs = ode.amax().max(pde_abs);
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    Ok((abs, rel(ode.amax(), ode_scale).max(rel(pde_abs, pde_scale))))
}
