//! Offline fusion of inertial trajectories, sparse position fixes and a
//! registered floorplan raster into a dense location history.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and the external flow exchange live in the `locfuse` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod geo;
pub mod optimizer;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod trajectory;

mod spline;

pub use error::{Error, Result};
pub use geo::{FloorplanRaster, GeoRegistration, Legend, PixelClass, Vec2};
pub use optimizer::{CorrectionSolution, FlpFix, OptimizerConfig, SolveReport};
pub use trajectory::{CorrectionParams, InertialTrajectory, PositionSeries};
