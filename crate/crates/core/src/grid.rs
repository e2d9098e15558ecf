//! Grid and annotation types.
//!
//! Coordinates are `(x = column, y = row)` with the origin at the top-left
//! pixel. Grids are stored row-major.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A head annotation or a real-valued location in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Nearest pixel `(column, row)`, clamped into a `width x height` frame.
    pub fn snap(&self, width: usize, height: usize) -> (usize, usize) {
        let cx = crate::math::round(self.x).max(0.0) as usize;
        let cy = crate::math::round(self.y).max(0.0) as usize;
        (cx.min(width - 1), cy.min(height - 1))
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Point) -> f64 {
        crate::math::sqrt(self.distance_sq(other))
    }
}

/// Head-center annotations of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    width: usize,
    height: usize,
    points: Vec<Point>,
}

impl AnnotationSet {
    /// Builds an annotation set, rejecting any point outside
    /// `[0, width) x [0, height)`.
    pub fn new(width: usize, height: usize, points: Vec<Point>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("frame", "width and height must be positive"));
        }
        for (index, p) in points.iter().enumerate() {
            let inside = p.x >= 0.0 && p.y >= 0.0 && p.x < width as f64 && p.y < height as f64;
            if !inside {
                return Err(Error::Validation {
                    index,
                    reason: "point lies outside the frame",
                });
            }
        }
        Ok(AnnotationSet { width, height, points })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, Vec::new())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A dense grid of non-negative per-pixel densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DensityMap {
    /// Wraps a row-major value buffer. Values must be finite and `>= 0`.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .ok_or(Error::param("frame", "width * height overflows"))?;
        if values.len() != expected {
            return Err(Error::param("values", "length differs from width * height"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation {
                index,
                reason: "density values must be finite and non-negative",
            });
        }
        Ok(DensityMap { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        DensityMap {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    /// Builds a map from a generator `f(x, y)`. Negative outputs are clamped to 0.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y).max(0.0));
            }
        }
        DensityMap { width, height, values }
    }

    // Internal constructor for buffers already known to satisfy the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        DensityMap { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// The people count: the sum over all pixels.
    pub fn integral(&self) -> f64 {
        integral_count(self)
    }
}

/// Positive multiplicative scale applied to density values.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExpansionFactor(f64);

impl ExpansionFactor {
    pub fn new(factor: f64) -> Result<Self> {
        if factor.is_finite() && factor > 0.0 {
            Ok(ExpansionFactor(factor))
        } else {
            Err(Error::param("factor", "expansion factor must be positive and finite"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// The factor that undoes this one.
    pub fn inverse(self) -> Self {
        ExpansionFactor(1.0 / self.0)
    }
}

/// Sum of all pixel values.
pub fn integral_count(map: &DensityMap) -> f64 {
    map.values.iter().sum()
}

/// Multiplies every pixel by `factor`. Deflation is `expand_values(m, f.inverse())`.
pub fn expand_values(map: &DensityMap, factor: ExpansionFactor) -> DensityMap {
    let f = factor.get();
    DensityMap::from_raw(
        map.width,
        map.height,
        map.values.iter().map(|v| v * f).collect(),
    )
}
