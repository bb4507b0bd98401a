//! Lifted-operator imaging from cross-correlated receiver data.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the precision for callers that do not care.

pub mod analysis;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod harness;
pub mod operator;
pub mod oracle;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::{Real, SPEED_OF_LIGHT};

pub type SceneGrid64 = geometry::SceneGrid<f64>;
pub type Geometry64 = geometry::Geometry<f64>;
pub type SpectralGrid64 = forward::SpectralGrid<f64>;
pub type LiftedOperator64 = operator::LiftedOperator<f64>;
pub type InterferometricData64 = forward::InterferometricData<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;

pub type SceneGrid32 = geometry::SceneGrid<f32>;
pub type Geometry32 = geometry::Geometry<f32>;
pub type SpectralGrid32 = forward::SpectralGrid<f32>;
pub type LiftedOperator32 = operator::LiftedOperator<f32>;
pub type InterferometricData32 = forward::InterferometricData<f32>;
pub type SolverConfig32 = solver::SolverConfig<f32>;
