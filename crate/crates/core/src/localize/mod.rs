//! Unsupervised head localization on density maps.
//!
//! A density map is turned into a weighted point set (each pixel carries the
//! integer frequency `round(value * k)`), which is then clustered. Plain
//! [`kmeans`] places `K = round(integral)` centers over the whole set;
//! [`isolated_kmeans`] first splits the set into DBSCAN subregions and
//! enforces a local count in each one.

mod dbscan;
mod isolated;
mod kmeans;
mod points;

pub use dbscan::{dbscan, Clustering, DbscanParams, DEFAULT_EPSILON, DEFAULT_MIN_WEIGHT};
pub use isolated::{
    allocate_region_counts, isolated_kmeans, isolated_kmeans_detailed, IsolatedOutcome,
    SubregionPartition,
};
pub use kmeans::{
    kmeans, kmeans_fit, lloyd, weighted_wcss, KMeansFit, KMeansInit, KMeansParams,
};
pub use points::{
    build_point_set, global_cluster_count, WeightedPoint, WeightedPointSet,
    DEFAULT_POINT_EXPANSION,
};

use alloc::vec::Vec;

use crate::error::Result;
use crate::grid::{DensityMap, ExpansionFactor};

/// One estimated head: position plus the total point weight of its cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
}

/// Estimated head positions, ranked by descending cluster mass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalizationResult {
    pub centers: Vec<Center>,
}

impl LocalizationResult {
    pub fn new(mut centers: Vec<Center>) -> Self {
        sort_by_mass(&mut centers);
        LocalizationResult { centers }
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Descending mass, then ascending x, then ascending y.
pub(crate) fn sort_by_mass(centers: &mut [Center]) {
    centers.sort_by(|a, b| {
        b.mass
            .total_cmp(&a.mass)
            .then(a.x.total_cmp(&b.x))
            .then(a.y.total_cmp(&b.y))
    });
}

/// Plain KMeans localization with `K = round(integral)` over the whole map.
pub fn localize_kmeans(map: &DensityMap, factor: ExpansionFactor, params: &KMeansParams) -> Result<LocalizationResult> {
    let k = global_cluster_count(map);
    let pts = build_point_set(map, factor);
    kmeans(&pts, k, params)
}
