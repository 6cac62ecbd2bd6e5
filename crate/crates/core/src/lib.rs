//! Simulator and diagnostics for the drag-coupled two-phase compressible
//! Navier-Stokes system on the periodic torus `T^d`, `d = 1, 2, 3`.
//!
//! The particle phase `(n, v)` has degenerate viscosity and the fluid phase
//! `(rho, u)` has constant viscosities; the two exchange momentum through a
//! linear drag. Alongside the solver the crate evaluates the functionals the
//! analysis controls: energy and its dissipation, the Bresch-Desjardins and
//! Mellet-Vasseur entropies, conservation integrals, and the distance to the
//! constant equilibrium.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod grid;
pub mod init;
pub mod integrator;
pub mod invariants;
pub mod model;
pub mod par;
pub mod snapshot;

pub use error::{Error, Result};
