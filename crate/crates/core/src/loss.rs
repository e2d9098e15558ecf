//! Loss kernels over density and attention maps.
//!
//! All losses are plain functions of their inputs; none of them keeps
//! state or computes gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::DensityMap;
use crate::gtgen::AttentionMap;
use crate::math;

pub const DEFAULT_SAL_LEVELS: usize = 3;
pub const DEFAULT_MSDLC_SIZES: [usize; 3] = [1, 2, 4];
pub const DEFAULT_LAMBDA_ATT: f64 = 0.5;
pub const DEFAULT_CURRICULUM_SLOPE: f64 = 2e-3;
pub const DEFAULT_CURRICULUM_INTERCEPT: f64 = 5e-3;
const BCE_CLAMP: f64 = 1e-12;

fn check_dims(index: usize, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { index, left: a, right: b })
    }
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sum / a.len() as f64
}

/// Batch MSE: per-map mean of squared pixel differences, averaged over the batch.
pub fn mse_loss(preds: &[DensityMap], gts: &[DensityMap]) -> Result<f64> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(Error::param("batch", "prediction and ground-truth batches must be equal and non-empty"));
    }
    let mut total = 0.0;
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        check_dims(i, p.dims(), g.dims())?;
        total += mean_sq_diff(p.values(), g.values());
    }
    Ok(total / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    Max,
    Avg,
}

/// One 2x2 stride-2 pooling step. A trailing odd row or column is pooled
/// with the smaller window that remains.
fn pool2(values: &[f64], w: usize, h: usize, pooling: Pooling) -> (Vec<f64>, usize, usize) {
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = Vec::with_capacity(ow * oh);
    for oy in 0..oh {
        for ox in 0..ow {
            let (mut acc, mut count) = (match pooling {
                Pooling::Max => f64::NEG_INFINITY,
                Pooling::Avg => 0.0,
            }, 0usize);
            for y in 2 * oy..(2 * oy + 2).min(h) {
                for x in 2 * ox..(2 * ox + 2).min(w) {
                    let v = values[y * w + x];
                    match pooling {
                        Pooling::Max => acc = acc.max(v),
                        Pooling::Avg => acc += v,
                    }
                    count += 1;
                }
            }
            out.push(match pooling {
                Pooling::Max => acc,
                Pooling::Avg => acc / count as f64,
            });
        }
    }
    (out, ow, oh)
}

/// Spatial abstraction loss: the sum of per-level MSE where level 1 is the
/// input resolution and each further level pools both maps once more.
pub fn sal_loss(pred: &DensityMap, gt: &DensityMap, levels: usize, pooling: Pooling) -> Result<f64> {
    check_dims(0, pred.dims(), gt.dims())?;
    if levels == 0 {
        return Err(Error::param("levels", "must be at least 1"));
    }
    let (w, h) = pred.dims();
    let min_side = 1usize.checked_shl(levels as u32 - 1).unwrap_or(usize::MAX);
    if levels > usize::BITS as usize || w < min_side || h < min_side {
        return Err(Error::LevelDepth { levels, width: w, height: h });
    }
    let mut p = pred.values().to_vec();
    let mut g = gt.values().to_vec();
    let (mut cw, mut ch) = (w, h);
    let mut total = mean_sq_diff(&p, &g);
    for _ in 1..levels {
        let (np, nw, nh) = pool2(&p, cw, ch, pooling);
        let (ng, _, _) = pool2(&g, cw, ch, pooling);
        p = np;
        g = ng;
        cw = nw;
        ch = nh;
        total += mean_sq_diff(&p, &g);
    }
    Ok(total)
}

/// `k x k` adaptive average pooling; bin `(i, j)` covers rows
/// `[floor(i H / k), floor((i + 1) H / k))` and the analogous columns.
pub fn adaptive_avg_pool(map: &DensityMap, k: usize) -> Result<Vec<f64>> {
    let (w, h) = map.dims();
    if k == 0 || k > w || k > h {
        return Err(Error::param("k", "pool size must be in 1..=min(width, height)"));
    }
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        let (r0, r1) = (i * h / k, (i + 1) * h / k);
        for j in 0..k {
            let (c0, c1) = (j * w / k, (j + 1) * w / k);
            let mut sum = 0.0;
            for y in r0..r1 {
                sum += map.values()[y * w + c0..y * w + c1].iter().sum::<f64>();
            }
            out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    Ok(out)
}

/// Multi-scale density level consistency loss.
pub fn msdlc_loss(pred: &DensityMap, gt: &DensityMap, sizes: &[usize]) -> Result<f64> {
    check_dims(0, pred.dims(), gt.dims())?;
    let mut total = 0.0;
    for &k in sizes {
        let a = adaptive_avg_pool(pred, k)?;
        let b = adaptive_avg_pool(gt, k)?;
        let l1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        total += l1 / (k * k) as f64;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SsimKernel {
    Gaussian { size: usize, sigma: f64 },
    Uniform { size: usize },
}

impl SsimKernel {
    pub fn size(&self) -> usize {
        match *self {
            SsimKernel::Gaussian { size, .. } | SsimKernel::Uniform { size } => size,
        }
    }

    /// Normalized 1-D taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Result<Vec<f64>> {
        let size = self.size();
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::param("kernel.size", "must be odd and positive"));
        }
        let half = (size / 2) as f64;
        let raw: Vec<f64> = match *self {
            SsimKernel::Gaussian { sigma, .. } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::param("kernel.sigma", "must be positive"));
                }
                (0..size)
                    .map(|i| {
                        let d = i as f64 - half;
                        math::exp(-d * d / (2.0 * sigma * sigma))
                    })
                    .collect()
            }
            SsimKernel::Uniform { .. } => vec![1.0; size],
        };
        let total: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|v| v / total).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub kernel: SsimKernel,
    pub c1: f64,
    pub c2: f64,
}

impl SsimConfig {
    /// Stabilizers `(0.01 L)^2` and `(0.03 L)^2` for dynamic range `L`.
    pub fn new(kernel: SsimKernel, dynamic_range: f64) -> Self {
        SsimConfig {
            kernel,
            c1: (0.01 * dynamic_range) * (0.01 * dynamic_range),
            c2: (0.03 * dynamic_range) * (0.03 * dynamic_range),
        }
    }
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig::new(SsimKernel::Gaussian { size: 11, sigma: 1.5 }, 1.0)
    }
}

/// Mirror index without repeating the edge pixel (`-1 -> 1`, `n -> n - 2`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

// Separable weighted filter with reflected borders.
fn filter(values: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let half = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &values[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, wt) in taps.iter().enumerate() {
                acc += wt * row[reflect(x as isize + t as isize - half, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, wt) in taps.iter().enumerate() {
                acc += wt * tmp[reflect(y as isize + t as isize - half, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Per-pixel SSIM index map.
pub fn ssim_map(pred: &DensityMap, gt: &DensityMap, cfg: &SsimConfig) -> Result<Vec<f64>> {
    check_dims(0, pred.dims(), gt.dims())?;
    if !(cfg.c1 > 0.0 && cfg.c2 > 0.0) {
        return Err(Error::param("c1/c2", "stabilizers must be positive"));
    }
    let taps = cfg.kernel.taps()?;
    let (w, h) = pred.dims();
    if w < taps.len() || h < taps.len() {
        return Err(Error::param("kernel.size", "map is smaller than the SSIM kernel"));
    }
    let a = pred.values();
    let b = gt.values();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();

    let mu_a = filter(a, w, h, &taps);
    let mu_b = filter(b, w, h, &taps);
    let e_aa = filter(&aa, w, h, &taps);
    let e_bb = filter(&bb, w, h, &taps);
    let e_ab = filter(&ab, w, h, &taps);

    let (c1, c2) = (cfg.c1, cfg.c2);
    Ok((0..w * h)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            // Weighted second moments minus squared means equal the centered sums.
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .collect())
}

/// `1 - mean(SSIM)`.
pub fn ssim_loss(pred: &DensityMap, gt: &DensityMap, cfg: &SsimConfig) -> Result<f64> {
    let s = ssim_map(pred, gt, cfg)?;
    Ok(1.0 - s.iter().sum::<f64>() / s.len() as f64)
}

/// Binary cross-entropy between a predicted and a ground-truth attention map.
pub fn attention_loss(pred: &AttentionMap, gt: &AttentionMap) -> Result<f64> {
    check_dims(0, pred.dims(), gt.dims())?;
    let mut total = 0.0;
    for (index, (&p, &g)) in pred.values().iter().zip(gt.values()).enumerate() {
        if g != 0.0 && g != 1.0 {
            return Err(Error::Validation {
                index,
                reason: "ground-truth attention must be 0 or 1",
            });
        }
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        total -= g * math::ln(p) + (1.0 - g) * math::ln(1.0 - p);
    }
    Ok(total / pred.values().len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_att: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_att: DEFAULT_LAMBDA_ATT,
        }
    }
}

/// Weighted sum of already-computed components.
pub fn combine_total(mse: f64, msdlc: f64, attention: f64, weights: &LossWeights) -> f64 {
    mse + msdlc + weights.lambda_att * attention
}

/// `mse + msdlc + lambda * attention` with the default scale set `{1, 2, 4}`.
pub fn total_loss(
    pred: &DensityMap,
    gt: &DensityMap,
    pred_att: &AttentionMap,
    gt_att: &AttentionMap,
    weights: &LossWeights,
) -> Result<f64> {
    if !weights.lambda_att.is_finite() || weights.lambda_att < 0.0 {
        return Err(Error::param("lambda_att", "must be finite and non-negative"));
    }
    let mse = mse_loss(core::slice::from_ref(pred), core::slice::from_ref(gt))?;
    let msdlc = msdlc_loss(pred, gt, &DEFAULT_MSDLC_SIZES)?;
    let att = attention_loss(pred_att, gt_att)?;
    Ok(combine_total(mse, msdlc, att, weights))
}

/// Linear curriculum threshold `T(e) = slope * e + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumSchedule {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        CurriculumSchedule {
            slope: DEFAULT_CURRICULUM_SLOPE,
            intercept: DEFAULT_CURRICULUM_INTERCEPT,
        }
    }
}

impl CurriculumSchedule {
    pub fn threshold(&self, epoch: f64) -> f64 {
        self.slope * epoch + self.intercept
    }
}

/// Per-pixel loss weights in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl WeightGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::param("values", "length differs from width * height"));
        }
        Ok(WeightGrid { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        WeightGrid {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `W = T(e) / max(M, T(e))`: dense pixels are down-weighted early on.
pub fn curriculum_weights(gt: &DensityMap, epoch: f64, sched: &CurriculumSchedule) -> Result<WeightGrid> {
    if !(epoch >= 0.0) {
        return Err(Error::param("epoch", "must be non-negative"));
    }
    let t = sched.threshold(epoch);
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("threshold", "T(e) must be positive"));
    }
    Ok(WeightGrid {
        width: gt.width(),
        height: gt.height(),
        values: gt.values().iter().map(|&m| t / m.max(t)).collect(),
    })
}

/// MSE with each pixel difference scaled by its weight before squaring.
pub fn weighted_mse_loss(preds: &[DensityMap], gts: &[DensityMap], weights: &[WeightGrid]) -> Result<f64> {
    if preds.is_empty() || preds.len() != gts.len() || preds.len() != weights.len() {
        return Err(Error::param("batch", "batches must be equal and non-empty"));
    }
    let mut total = 0.0;
    for (i, ((p, g), wg)) in preds.iter().zip(gts).zip(weights).enumerate() {
        check_dims(i, p.dims(), g.dims())?;
        check_dims(i, p.dims(), wg.dims())?;
        let sum: f64 = p
            .values()
            .iter()
            .zip(g.values())
            .zip(wg.values())
            .map(|((a, b), w)| {
                let d = w * (a - b);
                d * d
            })
            .sum();
        total += sum / p.values().len() as f64;
    }
    Ok(total / preds.len() as f64)
}
