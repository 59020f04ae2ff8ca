//! File formats, external flow backends and the command-line pipeline
//! around [`locfuse_core`].

pub mod backend;
pub mod cli;
pub mod error;
pub mod exchange;
pub mod floorplan;
pub mod io;
pub mod plot;
pub mod run;

pub use error::{Error, Result};
pub use locfuse_core as core;
