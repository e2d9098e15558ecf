//! Crowd density-map toolkit core.
//!
//! Everything in this crate is a pure function over in-memory grids and
//! point sets, and builds without `std` (only `alloc` is required). File
//! formats, the command line and the benchmark driver live in the
//! `crowdmap` crate.
//!
//! The modules follow the pipeline:
//!
//! * [`grid`]: density maps, head annotations, value expansion.
//! * [`gtgen`]: ground-truth density and attention maps, synthetic scenes.
//! * [`loss`]: MSE, spatial abstraction, multi-scale consistency, SSIM,
//!   attention BCE, curriculum weighting.
//! * [`augment`]: crop planning and validate-by-patch tiling.
//! * [`localize`]: point-set construction, weighted KMeans, DBSCAN and
//!   isolated KMeans.
//! * [`eval`]: window IoU, localization AP, MAE/RMSE.
//!
//! ```
//! use crowdmap_core::gtgen::{generate_density_map, SigmaPolicy};
//! use crowdmap_core::localize::{isolated_kmeans, DbscanParams, KMeansParams};
//! use crowdmap_core::{AnnotationSet, ExpansionFactor, Point};
//!
//! let ann = AnnotationSet::new(128, 128, vec![Point::new(20.0, 30.0), Point::new(90.0, 100.0)])?;
//! let map = generate_density_map(&ann, &SigmaPolicy::fixed(3.0))?;
//! let heads = isolated_kmeans(
//!     &map,
//!     ExpansionFactor::new(500.0)?,
//!     &DbscanParams::default(),
//!     &KMeansParams::with_seed(7),
//! )?;
//! assert_eq!(heads.k(), 2);
//! # Ok::<(), crowdmap_core::Error>(())
//! ```

#![cfg_attr(not(feature = "std"), no_std)]
// Parameter checks use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod augment;
pub mod error;
pub mod eval;
pub mod grid;
pub mod gtgen;
pub mod localize;
pub mod loss;
mod math;

pub use error::{Error, Result};
pub use grid::{AnnotationSet, DensityMap, ExpansionFactor, Point};
