use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{integral_count, DensityMap, ExpansionFactor};
use crate::math;

/// Default expansion applied before rounding pixel values to frequencies.
pub const DEFAULT_POINT_EXPANSION: f64 = 500.0;

/// A pixel coordinate with an integer frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub x: u32,
    pub y: u32,
    pub weight: u64,
    /// The unexpanded density at this pixel.
    pub density: f64,
}

impl WeightedPoint {
    pub fn new(x: u32, y: u32, weight: u64, density: f64) -> Self {
        WeightedPoint { x, y, weight, density }
    }

    #[inline]
    pub fn dist_sq(&self, other: &WeightedPoint) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx * dx + dy * dy
    }

    #[inline]
    pub(crate) fn dist_sq_to(&self, cx: f64, cy: f64) -> f64 {
        let dx = self.x as f64 - cx;
        let dy = self.y as f64 - cy;
        dx * dx + dy * dy
    }

    /// Row-major key, used as the canonical order for tie-breaking.
    #[inline]
    pub(crate) fn raster_key(&self) -> (u32, u32) {
        (self.y, self.x)
    }
}

/// Weighted pixel set. Coordinates are unique; a point of weight `w` stands
/// for `w` coincident copies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedPointSet {
    width: usize,
    height: usize,
    points: Vec<WeightedPoint>,
}

impl WeightedPointSet {
    /// Validates and merges duplicate coordinates (weights and densities add;
    /// the first occurrence keeps its position in the order).
    pub fn from_points(width: usize, height: usize, points: Vec<WeightedPoint>) -> Result<Self> {
        let mut merged: Vec<WeightedPoint> = Vec::with_capacity(points.len());
        let mut slot = alloc::collections::BTreeMap::new();
        for (index, p) in points.into_iter().enumerate() {
            if p.weight == 0 {
                return Err(Error::Validation { index, reason: "point weight must be at least 1" });
            }
            if p.x as usize >= width || p.y as usize >= height {
                return Err(Error::Validation { index, reason: "point lies outside the frame" });
            }
            match slot.get(&(p.x, p.y)) {
                Some(&i) => {
                    let q: &mut WeightedPoint = &mut merged[i];
                    q.weight += p.weight;
                    q.density += p.density;
                }
                None => {
                    slot.insert((p.x, p.y), merged.len());
                    merged.push(p);
                }
            }
        }
        Ok(WeightedPointSet { width, height, points: merged })
    }

    pub(crate) fn from_raw(width: usize, height: usize, points: Vec<WeightedPoint>) -> Self {
        WeightedPointSet { width, height, points }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn points(&self) -> &[WeightedPoint] {
        &self.points
    }

    /// Number of distinct coordinates.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> u64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// The sub-set at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> WeightedPointSet {
        WeightedPointSet {
            width: self.width,
            height: self.height,
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

/// Samples every pixel by its frequency `round(value * factor)`; pixels whose
/// frequency rounds to zero are left out. Points come out in row-major order.
pub fn build_point_set(map: &DensityMap, factor: ExpansionFactor) -> WeightedPointSet {
    let f = factor.get();
    let mut points = Vec::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            let v = map.get(x, y);
            let freq = math::round(v * f);
            if freq >= 1.0 {
                points.push(WeightedPoint::new(x as u32, y as u32, freq as u64, v));
            }
        }
    }
    WeightedPointSet::from_raw(map.width(), map.height(), points)
}

/// `K = round(integral)`, never negative.
pub fn global_cluster_count(map: &DensityMap) -> usize {
    math::round(integral_count(map)).max(0.0) as usize
}
