//! Crop planning for training-time augmentation and the validate-by-patch
//! quarter split.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{AnnotationSet, DensityMap, Point};
use crate::math;

pub const DEFAULT_MIXED_RATIOS: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];

/// An axis-aligned crop window in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl CropRect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        CropRect { x, y, w, h }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }

    fn check(&self, width: usize, height: usize) -> Result<()> {
        if self.fits(width, height) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CropKind {
    /// One crop of `floor(ratio * side)` at a random offset.
    Random { ratio: f64 },
    /// The four quarters of the frame.
    FixedQuarters,
    /// The four quarters plus `extra` random crops of the given ratio.
    FixedPlusRandom { ratio: f64, extra: usize },
    /// One random crop whose ratio is drawn uniformly from `ratios`.
    Mixed { ratios: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CropStrategy {
    pub kind: CropKind,
    pub seed: u64,
}

impl CropStrategy {
    pub fn new(kind: CropKind, seed: u64) -> Self {
        CropStrategy { kind, seed }
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("ratio", "crop ratio must lie in (0, 1]"))
    }
}

fn random_rect(width: usize, height: usize, ratio: f64, rng: &mut ChaCha8Rng) -> Result<CropRect> {
    check_ratio(ratio)?;
    // Small epsilon so e.g. 0.7 * 10 lands on 7 rather than 6.999...
    let w = math::floor(ratio * width as f64 + 1e-9) as usize;
    let h = math::floor(ratio * height as f64 + 1e-9) as usize;
    if w == 0 || h == 0 {
        return Err(Error::param("ratio", "crop ratio yields an empty rectangle"));
    }
    let (w, h) = (w.min(width), h.min(height));
    let x = rng.random_range(0..=width - w);
    let y = rng.random_range(0..=height - h);
    Ok(CropRect { x, y, w, h })
}

/// Plans crops for one image. The result depends only on the frame size
/// and the strategy (including its seed).
pub fn plan_crops(width: usize, height: usize, strategy: &CropStrategy) -> Result<Vec<CropRect>> {
    if width == 0 || height == 0 {
        return Err(Error::param("frame", "width and height must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    match &strategy.kind {
        CropKind::Random { ratio } => Ok(alloc::vec![random_rect(width, height, *ratio, &mut rng)?]),
        CropKind::FixedQuarters => Ok(split_quarters(width, height)?.to_vec()),
        CropKind::FixedPlusRandom { ratio, extra } => {
            check_ratio(*ratio)?;
            let mut rects = split_quarters(width, height)?.to_vec();
            for _ in 0..*extra {
                rects.push(random_rect(width, height, *ratio, &mut rng)?);
            }
            Ok(rects)
        }
        CropKind::Mixed { ratios } => {
            if ratios.is_empty() {
                return Err(Error::param("ratios", "ratio set must be non-empty"));
            }
            for &r in ratios {
                check_ratio(r)?;
            }
            let ratio = ratios[rng.random_range(0..ratios.len())];
            Ok(alloc::vec![random_rect(width, height, ratio, &mut rng)?])
        }
    }
}

/// Copies the sub-grid under `rect`.
pub fn crop_map(map: &DensityMap, rect: &CropRect) -> Result<DensityMap> {
    rect.check(map.width(), map.height())?;
    let mut values = Vec::with_capacity(rect.w * rect.h);
    for y in rect.y..rect.y + rect.h {
        let start = y * map.width() + rect.x;
        values.extend_from_slice(&map.values()[start..start + rect.w]);
    }
    Ok(DensityMap::from_raw(rect.w, rect.h, values))
}

/// Keeps the heads inside `rect`, rebased to its origin.
pub fn crop_annotations(ann: &AnnotationSet, rect: &CropRect) -> Result<AnnotationSet> {
    rect.check(ann.width(), ann.height())?;
    let (x0, y0) = (rect.x as f64, rect.y as f64);
    let (x1, y1) = (x0 + rect.w as f64, y0 + rect.h as f64);
    let points = ann
        .points()
        .iter()
        .filter(|p| p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1)
        .map(|p| Point::new(p.x - x0, p.y - y0))
        .collect();
    AnnotationSet::new(rect.w, rect.h, points)
}

/// Exact four-way tiling: top-left, top-right, bottom-left, bottom-right.
/// With odd sides the bottom and right quarters take the extra row/column.
pub fn split_quarters(width: usize, height: usize) -> Result<[CropRect; 4]> {
    if width < 2 || height < 2 {
        return Err(Error::param("frame", "quarter split needs at least 2x2 pixels"));
    }
    let (hw, hh) = (width / 2, height / 2);
    let (rw, rh) = (width - hw, height - hh);
    Ok([
        CropRect::new(0, 0, hw, hh),
        CropRect::new(hw, 0, rw, hh),
        CropRect::new(0, hh, hw, rh),
        CropRect::new(hw, hh, rw, rh),
    ])
}

/// Image-level count from per-patch counts.
pub fn aggregate_patch_counts(counts: &[f64]) -> f64 {
    counts.iter().sum()
}
