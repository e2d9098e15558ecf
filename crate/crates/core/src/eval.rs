//! Localization AP and counting metrics.
//!
//! Predictions are ranked by descending cluster mass. Walking down the
//! ranking, each prediction is paired with the nearest ground-truth head not
//! yet consumed; the pair is a true positive when the two `delta x delta`
//! windows centered on them overlap with IoU at or above the threshold.
//! Only true positives consume a head.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{AnnotationSet, Point};
use crate::localize::{sort_by_mass, LocalizationResult};
use crate::math;

pub const DEFAULT_DELTAS: [f64; 3] = [10.0, 20.0, 40.0];
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub deltas: Vec<f64>,
    pub iou_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            deltas: DEFAULT_DELTAS.to_vec(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.iter().any(|d| !(*d >= 1.0 && d.is_finite())) {
            return Err(Error::param("deltas", "window sizes must be at least 1"));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::param("iou_threshold", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// IoU of the axis-aligned `delta x delta` squares centered at `p` and `q`.
pub fn window_iou(p: Point, q: Point, delta: f64) -> f64 {
    let ox = (delta - (p.x - q.x).abs()).max(0.0);
    let oy = (delta - (p.y - q.y).abs()).max(0.0);
    let inter = ox * oy;
    inter / (2.0 * delta * delta - inter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    TruePositive { gt_index: usize },
    FalsePositive,
}

/// One ranked prediction and how it was judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedMatch {
    pub position: Point,
    pub mass: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub delta: f64,
    /// Predictions in rank order.
    pub matches: Vec<RankedMatch>,
    /// Precision/recall after each ranked prediction.
    pub curve: Vec<PrPoint>,
    pub true_positives: usize,
    pub ap: f64,
}

fn match_one(ranked: &[(Point, f64)], gt: &[Point], delta: f64, threshold: f64) -> MatchReport {
    let mut consumed = alloc::vec![false; gt.len()];
    let mut matches = Vec::with_capacity(ranked.len());
    let mut curve = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    let mut precision_sum = 0.0;
    for (rank, &(p, mass)) in ranked.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        for (j, g) in gt.iter().enumerate() {
            if consumed[j] {
                continue;
            }
            let d = p.distance_sq(g);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        let outcome = match best {
            Some((_, j)) if window_iou(p, gt[j], delta) >= threshold => {
                consumed[j] = true;
                tp += 1;
                precision_sum += tp as f64 / (rank + 1) as f64;
                Outcome::TruePositive { gt_index: j }
            }
            _ => Outcome::FalsePositive,
        };
        matches.push(RankedMatch { position: p, mass, outcome });
        curve.push(PrPoint {
            precision: tp as f64 / (rank + 1) as f64,
            recall: if gt.is_empty() { 0.0 } else { tp as f64 / gt.len() as f64 },
        });
    }
    let ap = match (gt.len(), ranked.len()) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (n, _) => precision_sum / n as f64,
    };
    MatchReport {
        delta,
        matches,
        curve,
        true_positives: tp,
        ap,
    }
}

/// Matches ranked predictions against the ground truth once per `delta`.
pub fn match_and_ap(result: &LocalizationResult, gt: &AnnotationSet, cfg: &EvalConfig) -> Result<Vec<MatchReport>> {
    cfg.validate()?;
    let mut centers = result.centers.clone();
    sort_by_mass(&mut centers);
    let ranked: Vec<(Point, f64)> = centers.iter().map(|c| (Point::new(c.x, c.y), c.mass)).collect();
    Ok(cfg
        .deltas
        .iter()
        .map(|&d| match_one(&ranked, gt.points(), d, cfg.iou_threshold))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingMetrics {
    pub mae: f64,
    pub rmse: f64,
}

/// MAE and RMSE over `(estimated, true)` count pairs.
pub fn counting_metrics(pairs: &[(f64, f64)]) -> Result<CountingMetrics> {
    if pairs.is_empty() {
        return Err(Error::param("pairs", "at least one count pair is required"));
    }
    let n = pairs.len() as f64;
    let mae = pairs.iter().map(|(e, t)| (e - t).abs()).sum::<f64>() / n;
    let mse = pairs.iter().map(|(e, t)| (e - t) * (e - t)).sum::<f64>() / n;
    Ok(CountingMetrics { mae, rmse: math::sqrt(mse) })
}
