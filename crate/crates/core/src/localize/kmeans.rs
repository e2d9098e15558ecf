//! Weighted Lloyd KMeans with k-means++ seeding.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::points::{WeightedPoint, WeightedPointSet};
use super::{Center, LocalizationResult};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KMeansInit {
    /// Weighted k-means++: each new center is drawn with probability
    /// proportional to `weight * D^2`.
    #[default]
    PlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iters: usize,
    /// Stop once every center moves less than this many pixels.
    pub tol: f64,
    pub seed: u64,
    pub init: KMeansInit,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iters: 100,
            tol: 1e-4,
            seed: 0,
            init: KMeansInit::PlusPlus,
        }
    }
}

impl KMeansParams {
    pub fn with_seed(seed: u64) -> Self {
        KMeansParams { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        Ok(())
    }
}

/// Full output of a KMeans run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centers: Vec<(f64, f64)>,
    /// Cluster index of each input point.
    pub labels: Vec<usize>,
    /// Total point weight per cluster.
    pub masses: Vec<f64>,
    /// Weighted within-cluster sum of squares after every Lloyd iteration.
    pub wcss_trace: Vec<f64>,
    pub iterations: usize,
}

impl KMeansFit {
    pub fn wcss(&self) -> f64 {
        self.wcss_trace.last().copied().unwrap_or(0.0)
    }

    pub fn into_result(self) -> LocalizationResult {
        LocalizationResult::new(
            self.centers
                .iter()
                .zip(&self.masses)
                .map(|(&(x, y), &mass)| Center { x, y, mass })
                .collect(),
        )
    }
}

/// Weighted WCSS of an assignment.
pub fn weighted_wcss(points: &[WeightedPoint], centers: &[(f64, f64)], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| p.weight as f64 * p.dist_sq_to(centers[l].0, centers[l].1))
        .sum()
}

// Index drawn with probability proportional to `mass[i]`.
fn draw(mass: &[f64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            acc += m;
            last = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last
}

/// Greedy weighted k-means++: each step draws `2 + floor(ln k)` candidates
/// with probability proportional to `weight * D^2` and keeps the one that
/// lowers the total potential most (first drawn wins ties).
fn plus_plus(points: &[WeightedPoint], k: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let weights: Vec<f64> = points.iter().map(|p| p.weight as f64).collect();
    let trials = 2 + math::floor(math::ln(k.max(1) as f64)) as usize;
    let first = draw(&weights, rng).unwrap_or(0);
    let mut centers = Vec::with_capacity(k);
    centers.push((points[first].x as f64, points[first].y as f64));
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| p.dist_sq_to(centers[0].0, centers[0].1))
        .collect();
    let mut scratch = vec![0.0; points.len()];
    while centers.len() < k {
        let mass: Vec<f64> = weights.iter().zip(&d2).map(|(w, d)| w * d).collect();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            // With k <= distinct points some point is always off-center.
            let i = draw(&mass, rng).unwrap_or(0);
            let (cx, cy) = (points[i].x as f64, points[i].y as f64);
            let mut potential = 0.0;
            for ((s, &d), (p, w)) in scratch.iter_mut().zip(&d2).zip(points.iter().zip(&weights)) {
                *s = d.min(p.dist_sq_to(cx, cy));
                potential += w * *s;
            }
            if best.as_ref().is_none_or(|b| potential < b.0) {
                let buf = best.take().map(|b| b.2).unwrap_or_else(|| vec![0.0; points.len()]);
                best = Some((potential, i, core::mem::replace(&mut scratch, buf)));
            }
        }
        let (_, i, next) = best.expect("at least one trial");
        centers.push((points[i].x as f64, points[i].y as f64));
        d2 = next;
    }
    centers
}

/// Lloyd iterations from the given initial centers.
///
/// Assignment ties go to the lower center index. A cluster left empty takes
/// over the point farthest from its current center (among clusters that
/// still have another member), which strictly lowers the WCSS.
///
/// Per-point distance bounds (Hamerly's scheme) skip the full center scan
/// for points that provably keep their assignment; the skip test carries a
/// small slack so the labels always equal those of an exhaustive scan.
pub fn lloyd(points: &[WeightedPoint], init: Vec<(f64, f64)>, params: &KMeansParams) -> Result<KMeansFit> {
    params.validate()?;
    let k = init.len();
    let n = points.len();
    let mut centers = init;
    let mut trace = Vec::new();
    let mut iterations = 0;
    if k == 0 || n == 0 {
        return Ok(KMeansFit {
            centers,
            labels: if k == 0 { Vec::new() } else { vec![0; n] },
            masses: vec![0.0; k],
            wcss_trace: trace,
            iterations,
        });
    }

    let mut labels = vec![0usize; n];
    // Upper bound on the distance to the assigned center, lower bound on the
    // distance to every other center. Infinite/zero force a full scan.
    let mut upper = vec![f64::INFINITY; n];
    let mut lower = vec![0.0f64; n];
    let mut half_gap = vec![0.0f64; k];
    let mut counts = vec![0usize; k];
    let mut shifts = vec![0.0f64; k];

    for _ in 0..params.max_iters {
        iterations += 1;

        for (j, g) in half_gap.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            for (jj, c) in centers.iter().enumerate() {
                if jj != j {
                    let dx = c.0 - centers[j].0;
                    let dy = c.1 - centers[j].1;
                    best = best.min(dx * dx + dy * dy);
                }
            }
            *g = 0.5 * math::sqrt(best);
        }

        counts.iter_mut().for_each(|c| *c = 0);
        for (i, p) in points.iter().enumerate() {
            let bound = half_gap[labels[i]].max(lower[i]);
            let safe = |u: f64| u * (1.0 + 1e-9) + 1e-9 < bound;
            if !safe(upper[i]) {
                let a = labels[i];
                upper[i] = math::sqrt(p.dist_sq_to(centers[a].0, centers[a].1));
                if !safe(upper[i]) {
                    let mut best = (0usize, f64::INFINITY);
                    let mut second = f64::INFINITY;
                    for (j, &(cx, cy)) in centers.iter().enumerate() {
                        let d = p.dist_sq_to(cx, cy);
                        if d < best.1 {
                            second = best.1;
                            best = (j, d);
                        } else if d < second {
                            second = d;
                        }
                    }
                    labels[i] = best.0;
                    upper[i] = math::sqrt(best.1);
                    lower[i] = math::sqrt(second);
                }
            }
            counts[labels[i]] += 1;
        }

        let mut repaired = false;
        for j in 0..k {
            if counts[j] != 0 {
                continue;
            }
            let mut far: Option<(usize, f64)> = None;
            for (i, p) in points.iter().enumerate() {
                let a = labels[i];
                let d = p.dist_sq_to(centers[a].0, centers[a].1);
                if counts[a] > 1 && far.is_none_or(|(_, fd)| d > fd) {
                    far = Some((i, d));
                }
            }
            if let Some((i, _)) = far {
                counts[labels[i]] -= 1;
                counts[j] = 1;
                labels[i] = j;
                centers[j] = (points[i].x as f64, points[i].y as f64);
                repaired = true;
            }
        }

        let mut sums = vec![(0.0f64, 0.0f64, 0.0f64); k];
        for (p, &l) in points.iter().zip(&labels) {
            let w = p.weight as f64;
            sums[l].0 += w * p.x as f64;
            sums[l].1 += w * p.y as f64;
            sums[l].2 += w;
        }
        for ((c, &(sx, sy, sw)), shift) in centers.iter_mut().zip(&sums).zip(shifts.iter_mut()) {
            *shift = 0.0;
            if sw > 0.0 {
                let next = (sx / sw, sy / sw);
                let dx = next.0 - c.0;
                let dy = next.1 - c.1;
                *shift = math::sqrt(dx * dx + dy * dy);
                *c = next;
            }
        }
        trace.push(weighted_wcss(points, &centers, &labels));

        let max_shift = shifts.iter().copied().fold(0.0, f64::max);
        if max_shift < params.tol {
            break;
        }
        if repaired {
            upper.iter_mut().for_each(|u| *u = f64::INFINITY);
            lower.iter_mut().for_each(|l| *l = 0.0);
        } else {
            let (mut top, mut top_j, mut runner) = (0.0f64, 0usize, 0.0f64);
            for (j, &s) in shifts.iter().enumerate() {
                if s > top {
                    runner = top;
                    top = s;
                    top_j = j;
                } else if s > runner {
                    runner = s;
                }
            }
            for i in 0..n {
                let a = labels[i];
                upper[i] += shifts[a];
                lower[i] -= if a == top_j { runner } else { top };
            }
        }
    }

    let mut masses = vec![0.0; k];
    for (p, &l) in points.iter().zip(&labels) {
        masses[l] += p.weight as f64;
    }
    Ok(KMeansFit {
        centers,
        labels,
        masses,
        wcss_trace: trace,
        iterations,
    })
}

/// Seeded weighted KMeans over a slice of points.
pub(crate) fn fit_points(points: &[WeightedPoint], k: usize, params: &KMeansParams) -> Result<KMeansFit> {
    params.validate()?;
    if k > points.len() {
        return Err(Error::InfeasibleK { requested: k, distinct: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = if k == 0 {
        Vec::new()
    } else {
        match params.init {
            KMeansInit::PlusPlus => plus_plus(points, k, &mut rng),
        }
    };
    lloyd(points, init, params)
}

/// Weighted KMeans with `K` clusters, returning the full fit.
pub fn kmeans_fit(pts: &WeightedPointSet, k: usize, params: &KMeansParams) -> Result<KMeansFit> {
    fit_points(pts.points(), k, params)
}

/// Weighted KMeans with `K` clusters. `K` may not exceed the number of
/// distinct points; `K = 0` gives an empty result.
pub fn kmeans(pts: &WeightedPointSet, k: usize, params: &KMeansParams) -> Result<LocalizationResult> {
    Ok(kmeans_fit(pts, k, params)?.into_result())
}
