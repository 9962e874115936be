//! Multiplane phase-only hologram synthesis with incoherent-style defocus
//! targets.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the optimization path and its gradient
//! checks assume.

pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod pipeline;
pub mod propagation;
pub mod scalar;
pub mod simulation;
pub mod solvers;
pub mod targeting;

pub use error::{Error, Result};
pub use field::OpticalConfig;
pub use io::RunConfig;
pub use scalar::Real;

pub type ComplexField = field::ComplexField<f64>;
pub type Propagator = propagation::Propagator<f64>;
pub type TransferFunction = propagation::TransferFunction<f64>;
pub type RgbdScene = targeting::RgbdScene<f64>;
pub type PlaneTargetSet = targeting::PlaneTargetSet<f64>;
pub type HologramPhase = solvers::HologramPhase<f64>;
pub type SolverTrace = solvers::SolverTrace<f64>;
pub type FocalStack = simulation::FocalStack<f64>;

pub type ComplexField32 = field::ComplexField<f32>;
pub type PlaneTargetSet32 = targeting::PlaneTargetSet<f32>;
pub type HologramPhase32 = solvers::HologramPhase<f32>;
