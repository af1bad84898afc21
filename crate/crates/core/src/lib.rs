//! Simulation and verification toolkit for the thermodynamic Kuramoto model:
//! phase oscillators whose coupling is divided by an individual temperature,
//! with temperatures relaxing through inverse-temperature exchange.
//!
//! The crate provides the vector fields ([`model`], [`tcs`]), an ODE
//! integrator with positivity safeguards ([`integrate`]), phase-locked
//! equilibria ([`equilibrium`]), closed-form bounds and trajectory checks
//! ([`analysis`]), packaged experiments ([`experiments`]) and scenario/report
//! file formats ([`io`]).

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod integrate;
pub mod io;
pub mod model;
pub mod par;
pub mod tcs;

pub use error::{Error, Result};
