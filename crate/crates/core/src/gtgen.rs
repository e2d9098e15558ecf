//! Ground-truth generation: density maps from head points, attention masks,
//! and seeded synthetic scenes.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{AnnotationSet, DensityMap, Point};
use crate::math;

pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_K_NEIGHBORS: usize = 3;
pub const DEFAULT_FIXED_SIGMA: f64 = 15.0;
pub const DEFAULT_ATTENTION_WINDOW: usize = 25;
pub const DEFAULT_ATTENTION_QUANTILE: f64 = 0.40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    Fixed,
    Adaptive,
}

/// How each head's Gaussian bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPolicy {
    pub mode: SigmaMode,
    pub fixed_sigma: f64,
    pub beta: f64,
    pub k_neighbors: usize,
    /// Used by adaptive mode for heads with fewer than `k_neighbors` neighbors.
    pub fallback_sigma: f64,
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        SigmaPolicy {
            mode: SigmaMode::Adaptive,
            fixed_sigma: DEFAULT_FIXED_SIGMA,
            beta: DEFAULT_BETA,
            k_neighbors: DEFAULT_K_NEIGHBORS,
            fallback_sigma: DEFAULT_FIXED_SIGMA,
        }
    }
}

impl SigmaPolicy {
    pub fn fixed(sigma: f64) -> Self {
        SigmaPolicy {
            mode: SigmaMode::Fixed,
            fixed_sigma: sigma,
            ..Default::default()
        }
    }

    pub fn adaptive(beta: f64, k_neighbors: usize) -> Self {
        SigmaPolicy {
            mode: SigmaMode::Adaptive,
            beta,
            k_neighbors,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.fixed_sigma) {
            return Err(Error::param("fixed_sigma", "must be positive"));
        }
        if !pos(self.beta) {
            return Err(Error::param("beta", "must be positive"));
        }
        if self.k_neighbors == 0 {
            return Err(Error::param("k_neighbors", "must be at least 1"));
        }
        if !pos(self.fallback_sigma) {
            return Err(Error::param("fallback_sigma", "must be positive"));
        }
        Ok(())
    }
}

/// Geometry-adaptive bandwidths: `beta` times the mean distance to the
/// `k_neighbors` nearest other heads, or `fallback_sigma` when the scene has
/// too few heads. Distance ties resolve to the lower point index.
pub fn adaptive_sigmas(ann: &AnnotationSet, policy: &SigmaPolicy) -> Result<Vec<f64>> {
    policy.validate()?;
    if policy.mode != SigmaMode::Adaptive {
        return Err(Error::param("mode", "adaptive_sigmas requires adaptive mode"));
    }
    let pts = ann.points();
    let k = policy.k_neighbors;
    if pts.len() <= k {
        return Ok(vec![policy.fallback_sigma; pts.len()]);
    }
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(pts.len() - 1);
    let sigmas = pts
        .iter()
        .enumerate()
        .map(|(j, p)| {
            scratch.clear();
            scratch.extend(
                pts.iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .map(|(i, q)| (p.distance(q), i)),
            );
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
            };
            scratch.select_nth_unstable_by(k - 1, by_dist);
            let nearest = &mut scratch[..k];
            nearest.sort_unstable_by(by_dist);
            let mean = nearest.iter().map(|(d, _)| d).sum::<f64>() / k as f64;
            policy.beta * mean
        })
        .collect();
    Ok(sigmas)
}

/// Per-head bandwidths under either mode.
pub fn head_sigmas(ann: &AnnotationSet, policy: &SigmaPolicy) -> Result<Vec<f64>> {
    policy.validate()?;
    match policy.mode {
        SigmaMode::Fixed => Ok(vec![policy.fixed_sigma; ann.len()]),
        SigmaMode::Adaptive => adaptive_sigmas(ann, policy),
    }
}

/// Renders the ground-truth density map.
///
/// Each head contributes an isotropic Gaussian centered on its nearest
/// pixel, truncated to a square of half-width `ceil(3 sigma)`, clipped to the
/// frame and renormalized so it adds exactly one person to the integral.
pub fn generate_density_map(ann: &AnnotationSet, policy: &SigmaPolicy) -> Result<DensityMap> {
    let sigmas = head_sigmas(ann, policy)?;
    let (w, h) = (ann.width(), ann.height());
    let mut values = vec![0.0f64; w * h];
    let mut kernel: Vec<f64> = Vec::new();
    for (p, &sigma) in ann.points().iter().zip(&sigmas) {
        let (cx, cy) = p.snap(w, h);
        // Coincident neighbors give sigma = 0: the kernel degenerates to a spike.
        if !(sigma > 0.0) {
            values[cy * w + cx] += 1.0;
            continue;
        }
        let r = math::ceil(3.0 * sigma) as usize;
        let x0 = cx.saturating_sub(r);
        let y0 = cy.saturating_sub(r);
        let x1 = (cx + r).min(w - 1);
        let y1 = (cy + r).min(h - 1);
        let inv = 1.0 / (2.0 * sigma * sigma);

        kernel.clear();
        let mut total = 0.0;
        for y in y0..=y1 {
            let dy = y as f64 - cy as f64;
            for x in x0..=x1 {
                let dx = x as f64 - cx as f64;
                let g = math::exp(-(dx * dx + dy * dy) * inv);
                kernel.push(g);
                total += g;
            }
        }
        let mut it = kernel.iter();
        for y in y0..=y1 {
            let row = &mut values[y * w..(y + 1) * w];
            for cell in &mut row[x0..=x1] {
                *cell += it.next().unwrap() / total;
            }
        }
    }
    Ok(DensityMap::from_raw(w, h, values))
}

/// Foreground mask with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl AttentionMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::param("values", "length differs from width * height"));
        }
        if let Some(index) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation {
                index,
                reason: "attention values must lie in [0, 1]",
            });
        }
        Ok(AttentionMap { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Window-based attention: 1 within Chebyshev distance `window / 2` of a
/// head's pixel, 0 elsewhere.
pub fn generate_attention_window(ann: &AnnotationSet, window: usize) -> Result<AttentionMap> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::param("window", "must be an odd positive integer"));
    }
    let (w, h) = (ann.width(), ann.height());
    let half = window / 2;
    let mut values = vec![0.0; w * h];
    for p in ann.points() {
        let (cx, cy) = p.snap(w, h);
        let x1 = (cx + half).min(w - 1);
        let y1 = (cy + half).min(h - 1);
        for y in cy.saturating_sub(half)..=y1 {
            values[y * w + cx.saturating_sub(half)..=y * w + x1].fill(1.0);
        }
    }
    Ok(AttentionMap { width: w, height: h, values })
}

/// Threshold-based attention: 1 where the density exceeds its
/// nearest-rank `q`-quantile.
pub fn generate_attention_threshold(map: &DensityMap, q: f64) -> Result<AttentionMap> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", "quantile must lie in (0, 1)"));
    }
    let t = nearest_rank_quantile(map.values(), q);
    let values = map
        .values()
        .iter()
        .map(|&v| if v > t { 1.0 } else { 0.0 })
        .collect();
    Ok(AttentionMap {
        width: map.width(),
        height: map.height(),
        values,
    })
}

/// The value of rank `ceil(q * n)` (1-based) in ascending order.
pub(crate) fn nearest_rank_quantile(values: &[f64], q: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    // The epsilon keeps q * n from rounding up past an exact integer rank.
    let rank = (math::ceil(q * n as f64 - 1e-9) as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Head placement for synthetic scenes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    Uniform,
    /// Heads drawn from `components` isotropic Gaussian blobs of standard
    /// deviation `spread` pixels, centers uniform over the frame.
    GaussianMixture { components: usize, spread: f64 },
}

/// Scale of the additive Gaussian pixel noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// Standard deviation in density units.
    Absolute(f64),
    /// Standard deviation as a fraction of the clean map's peak value.
    PeakFraction(f64),
}

impl NoiseLevel {
    fn value(self) -> f64 {
        match self {
            NoiseLevel::Absolute(v) | NoiseLevel::PeakFraction(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    /// Inclusive range of head counts.
    pub head_count: (usize, usize),
    pub placement: Placement,
    pub sigma: SigmaPolicy,
    /// Additive per-pixel noise; a zero level disables it.
    pub noise: NoiseLevel,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 256,
            height: 256,
            head_count: (10, 50),
            placement: Placement::Uniform,
            sigma: SigmaPolicy::default(),
            noise: NoiseLevel::Absolute(0.0),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("frame", "scene frame must have positive area"));
        }
        if self.head_count.0 > self.head_count.1 {
            return Err(Error::param("head_count", "min exceeds max"));
        }
        let noise = self.noise.value();
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::param("noise", "must be finite and non-negative"));
        }
        if let Placement::GaussianMixture { components, spread } = self.placement {
            if components == 0 {
                return Err(Error::param("components", "must be at least 1"));
            }
            if !(spread > 0.0 && spread.is_finite()) {
                return Err(Error::param("spread", "must be positive"));
            }
        }
        self.sigma.validate()
    }
}

/// A generated scene: annotations, the exact density map and a noisy copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub annotations: AnnotationSet,
    pub clean: DensityMap,
    pub noisy: DensityMap,
}

/// Generates a scene. Identical configs (including seed) give identical scenes.
pub fn synth_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let n = rng.random_range(cfg.head_count.0..=cfg.head_count.1);

    let mut points = Vec::with_capacity(n);
    match cfg.placement {
        Placement::Uniform => {
            for _ in 0..n {
                points.push(Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h)));
            }
        }
        Placement::GaussianMixture { components, spread } => {
            let centers: Vec<Point> = (0..components)
                .map(|_| Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h)))
                .collect();
            let offset = Normal::new(0.0, spread).map_err(|_| Error::param("spread", "invalid"))?;
            for _ in 0..n {
                let c = centers[rng.random_range(0..components)];
                // Rejection keeps the blob shape; after 16 misses use the component center.
                let mut p = Point::new(c.x, c.y);
                for _ in 0..16 {
                    let cand = Point::new(c.x + offset.sample(&mut rng), c.y + offset.sample(&mut rng));
                    if cand.x >= 0.0 && cand.x < w && cand.y >= 0.0 && cand.y < h {
                        p = cand;
                        break;
                    }
                }
                points.push(p);
            }
        }
    }

    let annotations = AnnotationSet::new(cfg.width, cfg.height, points)?;
    let clean = generate_density_map(&annotations, &cfg.sigma)?;
    let sigma = match cfg.noise {
        NoiseLevel::Absolute(v) => v,
        NoiseLevel::PeakFraction(v) => v * clean.max_value(),
    };
    let noisy = if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma)
            .map_err(|_| Error::param("noise_sigma", "invalid"))?;
        let values = clean
            .values()
            .iter()
            .map(|v| (v + noise.sample(&mut rng)).max(0.0))
            .collect();
        DensityMap::from_raw(cfg.width, cfg.height, values)
    } else {
        clean.clone()
    };
    Ok(Scene {
        annotations,
        clean,
        noisy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integral_count;
    use rand::Rng;
    use alloc::vec;
    use proptest::prelude::*;

    fn ann(w: usize, h: usize, pts: &[(f64, f64)]) -> AnnotationSet {
        AnnotationSet::new(w, h, pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn adaptive_sigma_matches_hand_computed_knn() {
        let a = ann(20, 20, &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (10.0, 10.0)]);
        let s = adaptive_sigmas(&a, &SigmaPolicy::default()).unwrap();
        // Independent: head (0,0) has neighbors at 1, 1, sqrt(200).
        let expected = 0.3 * (1.0 + 1.0 + libm::sqrt(200.0)) / 3.0;
        assert!((s[0] - expected).abs() < 1e-12);
        assert!((s[0] - 1.6142).abs() < 1e-4);
    }

    #[test]
    fn adaptive_sigma_falls_back_with_few_heads() {
        let a = ann(20, 20, &[(1.0, 1.0), (5.0, 5.0)]);
        assert_eq!(adaptive_sigmas(&a, &SigmaPolicy::default()).unwrap(), vec![15.0, 15.0]);
        let empty = AnnotationSet::empty(5, 5).unwrap();
        assert!(adaptive_sigmas(&empty, &SigmaPolicy::default()).unwrap().is_empty());
    }

    #[test]
    fn defaults_match_published_constants() {
        let p = SigmaPolicy::default();
        assert_eq!((p.beta, p.k_neighbors, p.fixed_sigma), (0.3, 3, 15.0));
        assert_eq!(SigmaPolicy::fixed(15.0).mode, SigmaMode::Fixed);
        assert_eq!(DEFAULT_ATTENTION_WINDOW, 25);
        assert_eq!(DEFAULT_ATTENTION_QUANTILE, 0.40);
    }

    #[test]
    fn single_head_integrates_to_one() {
        let a = ann(100, 100, &[(50.0, 50.0)]);
        let m = generate_density_map(&a, &SigmaPolicy::fixed(4.0)).unwrap();
        assert!((integral_count(&m) - 1.0).abs() < 1e-6);
        // Peak sits on the snapped center.
        assert_eq!(m.max_value(), m.get(50, 50));
    }

    #[test]
    fn border_heads_still_count_once() {
        let a = ann(30, 20, &[(0.0, 0.0), (29.9, 19.9), (15.0, 0.2)]);
        let m = generate_density_map(&a, &SigmaPolicy::fixed(15.0)).unwrap();
        assert!((integral_count(&m) - 3.0).abs() < 3e-6);
    }

    #[test]
    fn coincident_heads_render_as_spikes() {
        let a = ann(10, 10, &[(3.0, 3.0), (3.0, 3.0), (3.0, 3.0), (3.0, 3.0)]);
        let m = generate_density_map(&a, &SigmaPolicy::default()).unwrap();
        assert!((m.get(3, 3) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn attention_window_clipped_square() {
        let a = ann(20, 20, &[(5.0, 5.0)]);
        let m = generate_attention_window(&a, 25).unwrap();
        for y in 0..20 {
            for x in 0..20 {
                let expected = if x <= 17 && y <= 17 { 1.0 } else { 0.0 };
                assert_eq!(m.get(x, y), expected, "({x}, {y})");
            }
        }
        let none = generate_attention_window(&AnnotationSet::empty(8, 8).unwrap(), 25).unwrap();
        assert!(none.values().iter().all(|&v| v == 0.0));
        assert!(generate_attention_window(&a, 24).is_err());
        assert!(generate_attention_window(&a, 0).is_err());
    }

    #[test]
    fn attention_threshold_nearest_rank() {
        let m = DensityMap::new(5, 1, vec![0.0, 0.0, 0.0, 1.0, 2.0]).unwrap();
        let att = generate_attention_threshold(&m, 0.4).unwrap();
        assert_eq!(att.values(), &[0.0, 0.0, 0.0, 1.0, 1.0]);
        let flat = DensityMap::new(3, 3, vec![0.7; 9]).unwrap();
        let att = generate_attention_threshold(&flat, 0.4).unwrap();
        assert!(att.values().iter().all(|&v| v == 0.0));
        assert!(generate_attention_threshold(&m, 0.0).is_err());
        assert!(generate_attention_threshold(&m, 1.0).is_err());
    }

    #[test]
    fn scene_is_seed_deterministic() {
        let cfg = SceneConfig {
            noise: NoiseLevel::Absolute(1e-3),
            placement: Placement::GaussianMixture { components: 3, spread: 20.0 },
            seed: 42,
            ..Default::default()
        };
        let a = synth_scene(&cfg).unwrap();
        let b = synth_scene(&cfg).unwrap();
        assert_eq!(a, b);
        let n = a.annotations.len() as f64;
        assert!((integral_count(&a.clean) - n).abs() < 1e-4);
        assert_ne!(a.clean, a.noisy);
    }

    #[test]
    fn noiseless_scene_has_identical_maps() {
        let s = synth_scene(&SceneConfig { seed: 7, ..Default::default() }).unwrap();
        assert_eq!(s.clean, s.noisy);
    }

    #[test]
    fn peak_fraction_noise_scales_with_peak() {
        let base = SceneConfig { seed: 9, ..Default::default() };
        let peak = synth_scene(&base).unwrap().clean.max_value();
        let rel = synth_scene(&SceneConfig { noise: NoiseLevel::PeakFraction(0.1), ..base.clone() }).unwrap();
        let abs = synth_scene(&SceneConfig { noise: NoiseLevel::Absolute(0.1 * peak), ..base }).unwrap();
        assert_eq!(rel.noisy, abs.noisy);
        assert!(rel.noisy.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_area_scene_rejected() {
        let cfg = SceneConfig { width: 0, ..Default::default() };
        assert!(synth_scene(&cfg).is_err());
    }

    fn arb_ann() -> impl Strategy<Value = AnnotationSet> {
        (8usize..64, 8usize..64).prop_flat_map(|(w, h)| {
            proptest::collection::vec((0.0..w as f64, 0.0..h as f64), 0..30).prop_map(move |pts| {
                AnnotationSet::new(w, h, pts.into_iter().map(|(x, y)| Point::new(x, y)).collect())
                    .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn density_conserves_count(a in arb_ann()) {
            let m = generate_density_map(&a, &SigmaPolicy::default()).unwrap();
            let n = a.len() as f64;
            prop_assert!((integral_count(&m) - n).abs() <= n * 1e-6 + 1e-9);
        }

        #[test]
        fn density_is_permutation_invariant(a in arb_ann(), seed in any::<u64>()) {
            let mut pts = a.points().to_vec();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..pts.len()).rev() {
                let j = Rng::random_range(&mut rng, 0..=i);
                pts.swap(i, j);
            }
            let b = AnnotationSet::new(a.width(), a.height(), pts).unwrap();
            let ma = generate_density_map(&a, &SigmaPolicy::default()).unwrap();
            let mb = generate_density_map(&b, &SigmaPolicy::default()).unwrap();
            for (x, y) in ma.values().iter().zip(mb.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn adaptive_sigma_translation_invariant(
            pts in proptest::collection::vec((0u16..100, 0u16..100), 0..25),
            dx in 0u16..50, dy in 0u16..50,
        ) {
            let a = AnnotationSet::new(200, 200,
                pts.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect()).unwrap();
            let b = AnnotationSet::new(200, 200,
                pts.iter().map(|&(x, y)| Point::new((x + dx) as f64, (y + dy) as f64)).collect()).unwrap();
            let pol = SigmaPolicy::default();
            prop_assert_eq!(adaptive_sigmas(&a, &pol).unwrap(), adaptive_sigmas(&b, &pol).unwrap());
        }

        #[test]
        fn attention_window_matches_brute_force(a in arb_ann(), half in 0usize..8) {
            let window = 2 * half + 1;
            let m = generate_attention_window(&a, window).unwrap();
            let centers: Vec<(i64, i64)> = a.points().iter().map(|p| {
                let (x, y) = p.snap(a.width(), a.height());
                (x as i64, y as i64)
            }).collect();
            for y in 0..a.height() {
                for x in 0..a.width() {
                    let inside = centers.iter().any(|&(cx, cy)| {
                        (x as i64 - cx).abs().max((y as i64 - cy).abs()) <= half as i64
                    });
                    prop_assert_eq!(m.get(x, y), if inside { 1.0 } else { 0.0 });
                }
            }
        }
    }
}
