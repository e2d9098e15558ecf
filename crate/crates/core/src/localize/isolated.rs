//! Isolated KMeans: DBSCAN subregions, a local head count per subregion,
//! and per-subregion KMeans so the center count matches both globally and
//! locally.

use alloc::vec;
use alloc::vec::Vec;

use super::dbscan::{dbscan, DbscanParams};
use super::kmeans::{fit_points, KMeansParams};
use super::points::{build_point_set, global_cluster_count};
use super::{Center, LocalizationResult};
use crate::error::Result;
use crate::grid::{DensityMap, ExpansionFactor};
use crate::math;

/// How the point set was split and how many centers each subregion got.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubregionPartition {
    /// Subregion of each point (`0..n_regions`).
    pub labels: Vec<usize>,
    /// Centers allocated to each subregion.
    pub region_counts: Vec<usize>,
    /// Summed raw density per subregion.
    pub region_mass: Vec<f64>,
    /// Distinct points per subregion.
    pub region_sizes: Vec<usize>,
    /// Subregion ids sorted ascending by their rounded local count.
    pub order: Vec<usize>,
    /// Centers that could not be placed on any subregion point.
    pub unplaced: usize,
}

impl SubregionPartition {
    pub fn n_regions(&self) -> usize {
        self.region_counts.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolatedOutcome {
    pub result: LocalizationResult,
    pub partition: SubregionPartition,
}

/// Splits `k` centers over subregions.
///
/// Every subregion except the last in `order` gets `round(mass)`; the last
/// one gets the remainder. A negative remainder is paid back by decrementing
/// the largest of the other counts. Counts above a region's distinct point
/// count spill over, one at a time, to the largest regions with room left.
/// Returns the counts (indexed by region id) and the number of centers no
/// region could take.
pub fn allocate_region_counts(k: usize, mass: &[f64], sizes: &[usize], order: &[usize]) -> (Vec<usize>, usize) {
    let n = mass.len();
    let mut counts = vec![0i64; n];
    if n == 0 {
        return (Vec::new(), k);
    }
    let last = order[n - 1];
    let mut assigned = 0i64;
    for &r in &order[..n - 1] {
        counts[r] = math::round(mass[r]).max(0.0) as i64;
        assigned += counts[r];
    }
    counts[last] = k as i64 - assigned;
    while counts[last] < 0 {
        // Largest donor; later in the order wins ties.
        let donor = order[..n - 1]
            .iter()
            .copied()
            .max_by_key(|&r| counts[r])
            .expect("a negative remainder implies other regions");
        counts[donor] -= 1;
        counts[last] += 1;
    }

    let mut surplus = 0i64;
    for r in 0..n {
        let cap = sizes[r] as i64;
        if counts[r] > cap {
            surplus += counts[r] - cap;
            counts[r] = cap;
        }
    }
    for &r in order.iter().rev() {
        if surplus == 0 {
            break;
        }
        let room = (sizes[r] as i64 - counts[r]).min(surplus);
        counts[r] += room;
        surplus -= room;
    }
    (counts.into_iter().map(|c| c as usize).collect(), surplus as usize)
}

/// Zero-mass centers on the densest pixels not already holding a center.
fn fallback_centers(map: &DensityMap, taken: &[Center], count: usize) -> Vec<Center> {
    let mut pixels: Vec<(f64, usize)> = map.values().iter().copied().enumerate().map(|(i, v)| (v, i)).collect();
    pixels.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let w = map.width();
    let used = |x: f64, y: f64| taken.iter().any(|c| c.x == x && c.y == y);
    let mut out = Vec::with_capacity(count);
    for &(_, i) in pixels.iter().cycle() {
        if out.len() == count {
            break;
        }
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        if out.len() + taken.len() < pixels.len() && used(x, y) {
            continue;
        }
        out.push(Center { x, y, mass: 0.0 });
    }
    out
}

/// Runs isolated KMeans and also reports the subregion partition.
pub fn isolated_kmeans_detailed(
    map: &DensityMap,
    factor: ExpansionFactor,
    dbscan_params: &DbscanParams,
    kmeans_params: &KMeansParams,
) -> Result<IsolatedOutcome> {
    dbscan_params.validate()?;
    kmeans_params.validate()?;
    let k = global_cluster_count(map);
    if k == 0 {
        return Ok(IsolatedOutcome {
            result: LocalizationResult::default(),
            partition: SubregionPartition::default(),
        });
    }
    let set = build_point_set(map, factor);
    let clustering = dbscan(&set, dbscan_params)?;
    let n_regions = clustering.n_clusters;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_regions];
    let mut region_mass = vec![0.0f64; n_regions];
    for (i, &l) in clustering.labels.iter().enumerate() {
        members[l].push(i);
        region_mass[l] += set.points()[i].density;
    }
    let region_sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let mut order: Vec<usize> = (0..n_regions).collect();
    order.sort_by_key(|&r| math::round(region_mass[r]).max(0.0) as u64);

    let (region_counts, unplaced) = allocate_region_counts(k, &region_mass, &region_sizes, &order);

    let mut centers = Vec::with_capacity(k);
    for (pos, &r) in order.iter().enumerate() {
        if region_counts[r] == 0 {
            continue;
        }
        let pts: Vec<_> = members[r].iter().map(|&i| set.points()[i]).collect();
        let params = KMeansParams {
            seed: kmeans_params.seed.wrapping_add(pos as u64),
            ..*kmeans_params
        };
        let fit = fit_points(&pts, region_counts[r], &params)?;
        centers.extend(
            fit.centers
                .iter()
                .zip(&fit.masses)
                .map(|(&(x, y), &mass)| Center { x, y, mass }),
        );
    }
    if unplaced > 0 {
        let extra = fallback_centers(map, &centers, unplaced);
        centers.extend(extra);
    }

    Ok(IsolatedOutcome {
        result: LocalizationResult::new(centers),
        partition: SubregionPartition {
            labels: clustering.labels,
            region_counts,
            region_mass,
            region_sizes,
            order,
            unplaced,
        },
    })
}

/// Isolated KMeans localization; returns exactly `round(integral)` centers.
pub fn isolated_kmeans(
    map: &DensityMap,
    factor: ExpansionFactor,
    dbscan_params: &DbscanParams,
    kmeans_params: &KMeansParams,
) -> Result<LocalizationResult> {
    Ok(isolated_kmeans_detailed(map, factor, dbscan_params, kmeans_params)?.result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AnnotationSet, Point};
    use crate::gtgen::{generate_density_map, SigmaPolicy};
    use crate::localize::kmeans;
    use alloc::vec;
    use proptest::prelude::*;

    fn f500() -> ExpansionFactor {
        ExpansionFactor::new(500.0).unwrap()
    }

    #[test]
    fn two_separated_heads() {
        let heads = [(40.0, 50.0), (240.0, 50.0)];
        let ann = AnnotationSet::new(300, 100, heads.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
        let map = generate_density_map(&ann, &SigmaPolicy::fixed(2.0)).unwrap();
        let out = isolated_kmeans_detailed(&map, f500(), &DbscanParams::default(), &KMeansParams::default()).unwrap();
        assert_eq!(out.partition.n_regions(), 2);
        assert_eq!(out.partition.region_counts, vec![1, 1]);
        assert_eq!(out.result.k(), 2);
        for &(hx, hy) in &heads {
            assert!(out
                .result
                .centers
                .iter()
                .any(|c| ((c.x - hx).powi(2) + (c.y - hy).powi(2)).sqrt() <= 2.0));
        }
    }

    #[test]
    fn empty_map_gives_empty_result() {
        let r = isolated_kmeans(&DensityMap::zeros(16, 16), f500(), &DbscanParams::default(), &KMeansParams::default()).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn single_region_matches_plain_kmeans() {
        let ann = AnnotationSet::new(64, 64, vec![Point::new(30.0, 30.0), Point::new(34.0, 31.0), Point::new(31.0, 35.0)]).unwrap();
        let map = generate_density_map(&ann, &SigmaPolicy::fixed(3.0)).unwrap();
        let kp = KMeansParams::with_seed(11);
        let out = isolated_kmeans_detailed(&map, f500(), &DbscanParams::default(), &kp).unwrap();
        assert_eq!(out.partition.n_regions(), 1);
        let set = build_point_set(&map, f500());
        let plain = kmeans(&set, global_cluster_count(&map), &kp).unwrap();
        assert_eq!(out.result, plain);
    }

    #[test]
    fn allocation_remainder_goes_to_largest() {
        // Rounded counts 0, 1, 2 for the first two in order; last takes the rest.
        let mass = [2.4, 0.3, 1.2, 5.6];
        let sizes = [100; 4];
        let order = [1, 2, 0, 3];
        let (c, left) = allocate_region_counts(10, &mass, &sizes, &order);
        assert_eq!(c, vec![2, 0, 1, 7]);
        assert_eq!(left, 0);
    }

    #[test]
    fn allocation_pays_back_negative_remainder() {
        let mass = [0.6, 0.6, 0.6, 0.1];
        let order = [3, 0, 1, 2];
        // Rounded 0 + 1 + 1 = 2 already exceeds K = 1.
        let (c, left) = allocate_region_counts(1, &mass, &[10; 4], &order);
        assert_eq!(c.iter().sum::<usize>(), 1);
        assert_eq!(left, 0);
        assert_eq!(c, vec![1, 0, 0, 0]);
    }

    #[test]
    fn allocation_respects_capacity() {
        let mass = [1.0, 1.0, 8.0];
        let sizes = [3, 2, 4];
        let (c, left) = allocate_region_counts(9, &mass, &sizes, &[0, 1, 2]);
        assert_eq!(c, vec![3, 2, 4]);
        assert_eq!(left, 0);
        let (c, left) = allocate_region_counts(12, &mass, &sizes, &[0, 1, 2]);
        assert_eq!(c, vec![3, 2, 4]);
        assert_eq!(left, 3);
    }

    #[test]
    fn unplaceable_centers_fall_back_to_dense_pixels() {
        // Total 3 people spread so thin that no pixel reaches frequency 1 at k = 500.
        let map = DensityMap::from_fn(60, 60, |_, _| 3.0 / 3600.0 * 0.999);
        let r = isolated_kmeans(&map, f500(), &DbscanParams::default(), &KMeansParams::default()).unwrap();
        assert_eq!(r.k(), 3);
        assert!(r.centers.iter().all(|c| c.mass == 0.0));
    }

    proptest! {
        #[test]
        fn allocation_sums_to_k(
            regions in proptest::collection::vec((0.0f64..6.0, 1usize..8), 1..8),
            k in 0usize..40,
        ) {
            let mass: Vec<f64> = regions.iter().map(|r| r.0).collect();
            let sizes: Vec<usize> = regions.iter().map(|r| r.1).collect();
            let mut order: Vec<usize> = (0..mass.len()).collect();
            order.sort_by_key(|&r| libm::round(mass[r]) as u64);
            let (c, left) = allocate_region_counts(k, &mass, &sizes, &order);
            prop_assert_eq!(c.iter().sum::<usize>() + left, k);
            let capacity: usize = sizes.iter().sum();
            prop_assert_eq!(left, k.saturating_sub(capacity));
            for (ci, si) in c.iter().zip(&sizes) {
                prop_assert!(ci <= si);
            }
        }
    }
}
