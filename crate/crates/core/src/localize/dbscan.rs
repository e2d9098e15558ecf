//! Weighted DBSCAN on pixel coordinates.
//!
//! A point is a core point when the total weight inside its closed
//! `epsilon` disc (itself included) reaches `min_weight`. Clusters are the
//! connected components of core points; a border point joins the cluster of
//! its nearest core neighbor. Points left as noise are then attached to the
//! cluster of their nearest labeled point, so every point ends up labeled.
//! Distance ties always resolve to the point that comes first in row-major
//! order, which makes the partition independent of input order.

use alloc::vec;
use alloc::vec::Vec;

use super::points::{WeightedPoint, WeightedPointSet};
use crate::error::{Error, Result};
use crate::math;

pub const DEFAULT_EPSILON: f64 = 5.0;
pub const DEFAULT_MIN_WEIGHT: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    pub epsilon: f64,
    pub min_weight: u64,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            epsilon: DEFAULT_EPSILON,
            min_weight: DEFAULT_MIN_WEIGHT,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if self.min_weight == 0 {
            return Err(Error::param("min_weight", "must be at least 1"));
        }
        Ok(())
    }
}

/// Cluster labels `0..n_clusters` for every point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    pub core: Vec<bool>,
}

/// Uniform bucket grid with cells at least `epsilon` wide.
struct CellIndex {
    cell: f64,
    cols: usize,
    rows: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl CellIndex {
    fn new(points: &[WeightedPoint], width: usize, height: usize, epsilon: f64) -> Self {
        // Integer coordinates: a cell narrower than one pixel buys nothing.
        let cell = epsilon.max(1.0);
        let cols = (math::floor((width.max(1) - 1) as f64 / cell) as usize) + 1;
        let rows = (math::floor((height.max(1) - 1) as f64 / cell) as usize) + 1;
        let mut counts = vec![0usize; cols * rows + 1];
        let key = |p: &WeightedPoint| {
            let cx = (math::floor(p.x as f64 / cell) as usize).min(cols - 1);
            let cy = (math::floor(p.y as f64 / cell) as usize).min(rows - 1);
            cy * cols + cx
        };
        for p in points {
            counts[key(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; points.len()];
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            items[fill[k]] = i;
            fill[k] += 1;
        }
        CellIndex { cell, cols, rows, start: counts, items }
    }

    fn cell_of(&self, x: f64, y: f64) -> (isize, isize) {
        (
            math::floor(x / self.cell) as isize,
            math::floor(y / self.cell) as isize,
        )
    }

    fn bucket(&self, cx: isize, cy: isize) -> &[usize] {
        if cx < 0 || cy < 0 || cx as usize >= self.cols || cy as usize >= self.rows {
            return &[];
        }
        let k = cy as usize * self.cols + cx as usize;
        &self.items[self.start[k]..self.start[k + 1]]
    }

    /// Indices of points within `epsilon` of `points[i]`, self included.
    fn neighbors(&self, points: &[WeightedPoint], i: usize, eps_sq: f64, out: &mut Vec<usize>) {
        out.clear();
        let p = &points[i];
        let (cx, cy) = self.cell_of(p.x as f64, p.y as f64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                for &j in self.bucket(cx + dx, cy + dy) {
                    if p.dist_sq(&points[j]) <= eps_sq {
                        out.push(j);
                    }
                }
            }
        }
    }

    /// Nearest point among those accepted by `keep`, by expanding rings of cells.
    fn nearest(&self, points: &[WeightedPoint], i: usize, keep: impl Fn(usize) -> bool) -> Option<usize> {
        let p = &points[i];
        let (cx, cy) = self.cell_of(p.x as f64, p.y as f64);
        let max_ring = self.cols.max(self.rows) as isize;
        let mut best: Option<(f64, (u32, u32), usize)> = None;
        for r in 0..=max_ring {
            if let Some((d, _, _)) = best {
                // Everything in ring r is at least (r - 1) cells away.
                let reach = (r - 1) as f64 * self.cell;
                if reach > 0.0 && reach * reach > d {
                    break;
                }
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx.abs() != r && dy.abs() != r {
                        continue;
                    }
                    for &j in self.bucket(cx + dx, cy + dy) {
                        if !keep(j) {
                            continue;
                        }
                        let cand = (p.dist_sq(&points[j]), points[j].raster_key(), j);
                        let better = match best {
                            None => true,
                            Some(b) => cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1),
                        };
                        if better {
                            best = Some(cand);
                        }
                    }
                }
            }
        }
        best.map(|b| b.2)
    }
}

/// Runs weighted DBSCAN. An empty set gives an empty clustering. If no
/// point reaches `min_weight`, the whole set forms one cluster.
pub fn dbscan(pts: &WeightedPointSet, params: &DbscanParams) -> Result<Clustering> {
    params.validate()?;
    let points = pts.points();
    let n = points.len();
    if n == 0 {
        return Ok(Clustering::default());
    }
    let eps_sq = params.epsilon * params.epsilon;
    let index = CellIndex::new(points, pts.width(), pts.height(), params.epsilon);

    let mut scratch = Vec::new();
    let mut core = vec![false; n];
    for (i, c) in core.iter_mut().enumerate() {
        index.neighbors(points, i, eps_sq, &mut scratch);
        let mass: u64 = scratch.iter().map(|&j| points[j].weight).sum();
        *c = mass >= params.min_weight;
    }

    // Components of core points, seeded in row-major order of their first member.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| points[i].raster_key());
    const UNSET: usize = usize::MAX;
    let mut labels = vec![UNSET; n];
    let mut n_clusters = 0;
    let mut stack = Vec::new();
    for &seed in &order {
        if !core[seed] || labels[seed] != UNSET {
            continue;
        }
        labels[seed] = n_clusters;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            index.neighbors(points, i, eps_sq, &mut scratch);
            for &j in &scratch {
                if core[j] && labels[j] == UNSET {
                    labels[j] = n_clusters;
                    stack.push(j);
                }
            }
        }
        n_clusters += 1;
    }

    if n_clusters == 0 {
        return Ok(Clustering { labels: vec![0; n], n_clusters: 1, core });
    }

    // Border points: nearest core point within epsilon.
    for i in 0..n {
        if core[i] {
            continue;
        }
        index.neighbors(points, i, eps_sq, &mut scratch);
        let best = scratch
            .iter()
            .copied()
            .filter(|&j| core[j])
            .min_by(|&a, &b| {
                let da = points[i].dist_sq(&points[a]);
                let db = points[i].dist_sq(&points[b]);
                da.total_cmp(&db).then(points[a].raster_key().cmp(&points[b].raster_key()))
            });
        if let Some(j) = best {
            labels[i] = labels[j];
        }
    }

    // Noise: nearest labeled (core or border) point, no distance limit.
    let labeled: Vec<bool> = labels.iter().map(|&l| l != UNSET).collect();
    let noise: Vec<usize> = (0..n).filter(|&i| !labeled[i]).collect();
    for i in noise {
        let j = index
            .nearest(points, i, |j| labeled[j])
            .expect("at least one labeled point exists");
        labels[i] = labels[j];
    }

    Ok(Clustering { labels, n_clusters, core })
}
