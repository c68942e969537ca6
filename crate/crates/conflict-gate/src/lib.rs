//! Conflict-gated gradient scaling (CGGS) for physics-informed SEIR training.
//!
//! Training a network to fit sparse infection data while honoring the SEIR
//! equations is a two-objective problem whose gradients frequently point in
//! opposing directions. This crate implements the geometric gate that
//! suppresses the physics weight under directional conflict, the fixed-weight
//! and magnitude-balancing (LRA) baselines it is compared against, and
//! runtime checks for the deadlock, descent, and convergence results that
//! justify the gate.
//!
//! Layout:
//! - [`tape`]: scalar reverse-mode autodiff engine
//! - [`net`]: MLP with exact time-tangent propagation
//! - [`seir`]: ground-truth RK4 dynamics, ODE residual, datasets
//! - [`losses`]: data / ODE / logical loss terms as tape nodes
//! - [`weighting`]: gradient geometry and the fixed / LRA / CGGS weights
//! - [`trainer`]: the training loop, GD/Adam steppers, trace recording
//! - [`analysis`]: descent constants, deadlock demo, trace verdicts, metrics
//! - [`cli`]: experiment runner behind the `conflict-gate` binary

pub mod analysis;
pub mod cli;
pub mod error;
pub mod losses;
pub mod net;
pub mod seir;
pub mod tape;
pub mod trainer;
pub mod weighting;

pub use error::{Error, Result};
