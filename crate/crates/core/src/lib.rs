//! Energy-stable convex-splitting finite-difference solver for the
//! Functionalized Cahn-Hilliard (FCH) equation on a 2D periodic square,
//! with a preconditioned steepest descent (PSD) nonlinear solver.
//!
//! Module map:
//! - [`grid`]: staggered periodic grid functions and difference operators
//! - [`poisson`]: FFT solves for `-Δ_h`, the `H^{-1}` norm and the PSD preconditioner
//! - [`energy`]: discrete energy, its convex splitting and the per-step objective
//! - [`scheme`]: the nonlinear operator `N_h`, the time step and the time loop
//! - [`psd`]: the descent solver and its exact line search
//! - [`harness`]: initial data, refinement study, file output and run configuration

pub mod energy;
pub mod error;
pub mod grid;
pub mod harness;
mod lanes;
pub mod poisson;
pub mod psd;
pub mod scheme;

pub use energy::ModelParams;
pub use error::{FchError, Result};
pub use grid::{CellField, GridSpec, VertexField};
pub use poisson::SpectralPlan;
pub use psd::{PsdConfig, PsdReport};
