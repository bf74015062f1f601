//! Plug-and-play operator splitting with MoL-Grad denoisers.
//!
//! A MoL-Grad denoiser is the gradient of a convex function with a
//! `1/β`-Lipschitz gradient, `β ∈ (0,1)`. Such an operator is exactly the
//! single-valued proximity operator of a `(1-β)`-weakly convex penalty, so it
//! can stand in for a proximity operator in forward-backward and (suitably
//! modified) primal-dual splitting while keeping convergence guarantees.
//!
//! Modules:
//! - [`linalg`]: vectors, matrices, linear maps, spectral constants
//! - [`regularizers`]: shrinkage operators, penalties, brute-force oracles
//! - [`denoiser`]: the denoiser trait, catalog, and certification checks
//! - [`solvers`]: forward-backward, modified primal-dual, Condat–Vũ
//! - [`experiments`]: problem generation, metrics, agreement and sweep studies
//! - [`csvio`]: CSV import/export

pub mod csvio;
pub mod denoiser;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod regularizers;
pub mod solvers;

pub use error::{Error, Result, StepCondition};
pub use linalg::{DenseVector, LinearMap, Matrix};
