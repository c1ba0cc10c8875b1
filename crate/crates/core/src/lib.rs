//! Pseudo-spectral simulation of the Abels–Garcke–Grün diffuse-interface model
//! for two incompressible fluids with unmatched densities on the 2D torus.
//!
//! The crate is organized bottom-up:
//!
//! - [`spectral`]: Fourier fields, differential operators, dealiasing, norms
//!   and the Leray projection.
//! - [`model`]: constitutive laws, the logarithmic potential, chemical
//!   potential, forces and energies.
//! - [`cahn_hilliard`]: convex-splitting Newton step for the phase field.
//! - [`navier_stokes`]: semi-implicit momentum step with variable-density
//!   pressure projection and optional Galerkin truncation.
//! - [`diagnostics`]: monitored functionals and identity residuals.
//! - [`harness`]: configuration, time loop, checkpoints and experiments.

pub mod cahn_hilliard;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod krylov;
pub mod model;
pub mod navier_stokes;
pub mod spectral;

pub use cahn_hilliard::{ch_step, newton_solve, CHStepConfig, CHStepReport};
pub use diagnostics::{DiagnosticsRecord, SolverCounters};
pub use error::{Error, Result};
pub use model::{FlowState, FluidParams};
pub use navier_stokes::{galerkin_truncate, ns_step, pressure_solve, NSStepConfig, ViscousMode};
pub use spectral::{Grid, SpectralField, SpectralVectorField};
