//! Std companion to `crowdmap-core`: the DMF1 density-map format, JSON
//! annotation and center files, PGM rendering, and the synthetic
//! localization benchmark used by the `crowdmap` binary.

pub mod annotations;
pub mod bench;
pub mod centers;
pub mod dmf;
pub mod error;
pub mod pgm;

pub use crowdmap_core as core;
pub use error::{Error, Result};
