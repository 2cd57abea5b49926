//! Generalized inverse Gaussian (GIG) distributions: evaluation, sampling,
//! estimation, characterization probes, and Stein-operator diagnostics.
//!
//! The parameterization is `GIG(p, a, b)` with density proportional to
//! `x^{p-1} exp(-(a x + b/x)/2)` on `(0, ∞)`, including the boundary
//! branches Gamma (`b = 0`, `p > 0`) and reciprocal Gamma (`a = 0`, `p < 0`).

pub mod dist;
pub mod error;
pub mod estimate;
pub mod lab;
pub mod params;
pub mod quad;
pub mod report;
pub mod sampling;
pub mod seed;
pub mod special;
pub mod stats;
pub mod stein;

pub use error::{GigError, Result};
pub use params::{Branch, GammaParams, GigParams};
pub use seed::SeedPlan;

/// Library version, mirrored by the CLI.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
