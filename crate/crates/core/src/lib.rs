//! Neural tangent kernels for mixed-activation residual MLPs.
//!
//! This crate computes the infinite-width neural tangent kernel (NTK) of a
//! residual multilayer perceptron whose layers may use different activation
//! functions (ReLU, LeakyReLU, shifted Sigmoid, Tanh, Swish) and whose skip
//! connections are chosen per layer. Alongside the exact kernel recursion it
//! provides:
//!
//! - a finite-width network (forward pass, explicit Jacobian, empirical NTK,
//!   per-sample gradient norms, and an SGD trainer for the logistic margin
//!   loss),
//! - closed-form minimum-eigenvalue and generalization bounds driven by
//!   per-activation constants,
//! - a train-free architecture search that scores candidates by cheap
//!   spectral surrogates of the NTK and validates the top picks by short
//!   training runs,
//! - synthetic dataset generation on the unit sphere.
//!
//! All randomness is seeded (ChaCha-based) and every public computation is
//! deterministic given its inputs.

pub mod activations;
pub mod bounds;
pub mod data;
pub mod error;
pub mod gauss;
pub mod kernel;
pub mod network;
pub mod quad;
pub mod search;

pub use error::{Error, Result};
