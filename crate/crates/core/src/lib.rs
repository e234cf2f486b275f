//! Simulation and exact verification of locally self-interacting walks on
//! the integers whose jump law is a logistic function of a finite linear
//! combination of nearby edge local times.
//!
//! Kernel algebra is generic over [`Scalar`]; the aliases below cover the
//! common instantiations.

pub mod analysis;
pub mod cli;
pub mod coupling;
pub mod engine;
pub mod error;
pub mod gibbs;
pub mod kernel;
pub mod scalar;

pub use error::{Error, Result};
pub use kernel::{critical_ratio, predict_stuck_size, HalfOffset, InteractionKernel, KernelClassification};
pub use scalar::Scalar;

/// Kernel with double-precision weights; what the simulator runs on.
pub type Kernel = InteractionKernel<f64>;
/// Kernel with single-precision weights.
pub type Kernel32 = InteractionKernel<f32>;
/// Kernel with exact rational weights.
pub type ExactKernel = InteractionKernel<num_rational::Rational64>;
