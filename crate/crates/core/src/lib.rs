//! Finite-difference laboratory for the parabolic complex Monge-Ampère flow
//! `u_t = log det(u_{αβ̄}) + f(t, z, u)` on bounded domains in ℂⁿ, n ≤ 2.

pub mod complex_calculus;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod grid;
mod linalg;
pub mod oracle;
pub mod problem;
pub mod snapshot;
pub mod verify;

pub use error::{Error, ErrorClass, Result};
