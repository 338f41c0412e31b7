//! Numerical laboratory for kinetic boundary layers of the steady Boltzmann
//! equation in 2D convex domains.
//!
//! The crate discretizes the linearized hard-sphere collision operator on a
//! truncated polar velocity grid, solves the half-space Milne problem with
//! geometric correction along exact characteristics, probes the weighted
//! regularity of the layer, assembles the leading-order Navier-Stokes-Fourier
//! interior solution with its boundary matching, and cross-checks the
//! deterministic transport machinery against a stochastic-cycle Monte Carlo
//! estimator.
//!
//! See the `book/` guide at the repository root for a narrative walk-through
//! of each component.

pub mod characteristics;
pub mod collision;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hydro;
pub mod interp;
pub mod mc;
pub mod milne;
pub mod quad;
pub mod regularity;
pub mod velocity;

pub use error::{Error, Result};
pub use velocity::VelocityGrid;
