//! Elliptical Wishart distributions over symmetric positive-definite
//! matrices.
//!
//! - [`linalg`]: symmetric/SPD matrix primitives.
//! - [`geometry`]: the Fisher information geometry (two-parameter
//!   affine-invariant metric, exponential/logarithm maps, retraction,
//!   distance, vector transport, gradient conversion).
//! - [`model`]: density generators, densities, likelihood, gradient,
//!   sampling and assumption diagnostics.
//! - [`estimation`]: maximum-likelihood estimation by fixed-point iteration
//!   and Riemannian steepest descent / conjugate gradient.
//! - [`learning`]: discriminant analysis and K-means clustering.
//! - [`experiments`]: synthetic-data protocol, Monte-Carlo studies and file
//!   formats used by the command-line tool.

pub mod error;
pub mod estimation;
pub mod experiments;
pub mod geometry;
pub mod learning;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
