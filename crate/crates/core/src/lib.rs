//! Lidar visibility in snowfall.
//!
//! The crate estimates a 2-D snowflake density field from the hit and
//! pass-through statistics of lidar beams, converts the local mean density
//! into a p-visibility distance, and ships the tooling needed to check the
//! estimate: a labeled snowstorm simulator, the radius/statistical snow
//! filters (ROR, SOR, DROR, DSOR), and relative pose error evaluation.
//!
//! Numeric kernels that do not touch point storage (density estimation,
//! visibility, statistics) are generic over [`Real`]; the aliases below fix
//! them to `f64`, which is what the pipeline uses end to end.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod filters;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod scalar;
pub mod sim;
pub mod visibility;

pub use error::{Error, Result};
pub use geometry::{Pose, Trajectory};
pub use io::{LidarPoint, Scan};
pub use scalar::Real;

/// Per-cell density field in double precision.
pub type DensityField = grid::DensityField<f64>;
/// Per-cell density field in single precision.
pub type DensityField32 = grid::DensityField<f32>;
/// One point of a visibility time series in double precision.
pub type VisibilityEstimate = visibility::VisibilityEstimate<f64>;
/// Local mean density in double precision.
pub type MeanDensity = visibility::MeanDensity<f64>;
/// Beam parameters in double precision.
pub type BeamModel = grid::BeamModel<f64>;
