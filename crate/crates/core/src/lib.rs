//! Heterogeneous logistic reaction–diffusion model with harvesting.
//!
//! ```text
//! u_t = ∇·(a(x)∇u) + u(μ(x) − ν(x)u) − f(ωt, x) ρ_ε(u)
//! ```
//!
//! The crate computes principal eigenpairs of `−∇·(a∇·) − μ`, harvested
//! steady-state branches and their fold, the closed-form persistence and
//! collapse thresholds, long-time behaviour of harvested trajectories, and
//! periodic orbits under time-periodic forcing.

pub mod eigen;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod krylov;
pub mod model;
mod newton;
pub mod operators;
pub mod periodic;
pub mod spectral;
pub mod steady;
pub mod thresholds;

pub use error::{Error, Result};
pub use model::Model;
pub use newton::NewtonOptions;
