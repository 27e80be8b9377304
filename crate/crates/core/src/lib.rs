//! Simulation and control synthesis for single-track vehicle models with
//! distributed tire friction.
//!
//! The vehicle is an ODE in lateral velocity and yaw rate driven by the
//! integral of a hyperbolic PDE (bristle deflection over the contact patch).
//! The crate provides the semidiscrete model, the stationary solver, the
//! passivity-based backstepping controllers, the cascaded observer, a
//! fixed-step simulator and numerical certificates for the dissipativity
//! assumptions the design relies on.

pub mod analysis;
pub mod config;
pub mod controller;
pub mod equilibrium;
pub mod error;
pub mod field;
pub mod model;
pub mod observer;
pub mod plant;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
