//! Static 3-D k-d tree for exact nearest-neighbor queries.
//!
//! The tree is built once over a cloud's positions and is immutable
//! afterwards; queries are read-only and safe to run from many threads.
//! Ties in distance are broken towards the lowest original point index so
//! results are reproducible and match a brute-force scan exactly.

use nalgebra::Point3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Entry {
    point: Point3<f64>,
    index: u32,
}

/// Balanced k-d tree over a point cloud's positions.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    // Entries arranged as an implicit tree: each subrange stores its median
    // element at the middle, halves recurse. Axis cycles with depth.
    entries: Vec<Entry>,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut entries: Vec<Entry> = cloud
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| Entry {
                point: *p,
                index: i as u32,
            })
            .collect();
        build_range(&mut entries, 0);
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index and distance of the stored point nearest to `query`.
    pub fn nearest(&self, query: &Point3<f64>) -> (u32, f64) {
        self.nearest_excluding(query, None)
            .expect("index is never empty")
    }

    /// Distance from `query` to the nearest stored point.
    pub fn nearest_distance(&self, query: &Point3<f64>) -> f64 {
        self.nearest(query).1
    }

    /// Nearest stored point, optionally skipping one original index
    /// (used for nearest-other-point queries).
    pub fn nearest_excluding(&self, query: &Point3<f64>, skip: Option<u32>) -> Option<(u32, f64)> {
        let mut best = Best {
            dist_sq: f64::INFINITY,
            index: u32::MAX,
        };
        search(&self.entries, 0, query, skip, &mut best);
        if best.index == u32::MAX {
            None
        } else {
            Some((best.index, best.dist_sq.sqrt()))
        }
    }
}

struct Best {
    dist_sq: f64,
    index: u32,
}

fn build_range(entries: &mut [Entry], depth: usize) {
    if entries.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = entries.len() / 2;
    // Total order on (coordinate, original index) keeps the layout
    // deterministic even with duplicate coordinates.
    entries.select_nth_unstable_by(mid, |a, b| {
        a.point[axis]
            .partial_cmp(&b.point[axis])
            .unwrap()
            .then(a.index.cmp(&b.index))
    });
    let (lo, rest) = entries.split_at_mut(mid);
    build_range(lo, depth + 1);
    build_range(&mut rest[1..], depth + 1);
}

fn search(entries: &[Entry], depth: usize, query: &Point3<f64>, skip: Option<u32>, best: &mut Best) {
    if entries.is_empty() {
        return;
    }
    let mid = entries.len() / 2;
    let node = &entries[mid];

    if Some(node.index) != skip {
        let d_sq = (node.point - query).norm_squared();
        if d_sq < best.dist_sq || (d_sq == best.dist_sq && node.index < best.index) {
            best.dist_sq = d_sq;
            best.index = node.index;
        }
    }

    let axis = depth % 3;
    let delta = query[axis] - node.point[axis];
    let (near, far) = if delta < 0.0 {
        (&entries[..mid], &entries[mid + 1..])
    } else {
        (&entries[mid + 1..], &entries[..mid])
    };
    search(near, depth + 1, query, skip, best);
    // <= so equal-distance candidates on the far side still get visited and
    // the lowest-index tie rule holds.
    if delta * delta <= best.dist_sq {
        search(far, depth + 1, query, skip, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud_of(points: Vec<Point3<f64>>) -> PointCloud {
        PointCloud::new(points, None).unwrap()
    }

    fn brute_nearest(points: &[Point3<f64>], q: &Point3<f64>, skip: Option<u32>) -> (u32, f64) {
        let mut best = (u32::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            if Some(i as u32) == skip {
                continue;
            }
            let d = (p - q).norm_squared();
            if d < best.1 || (d == best.1 && (i as u32) < best.0) {
                best = (i as u32, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    #[test]
    fn two_point_query() {
        let c = cloud_of(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
        let idx = SpatialIndex::build(&c).unwrap();
        let (i, d) = idx.nearest(&Point3::new(0.1, 0.0, 0.0));
        assert_eq!(i, 0);
        assert!((d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn exact_hit_has_zero_distance() {
        let c = cloud_of(vec![
            Point3::new(0.5, -1.0, 2.0),
            Point3::new(3.0, 3.0, 3.0),
        ]);
        let idx = SpatialIndex::build(&c).unwrap();
        let (i, d) = idx.nearest(&Point3::new(3.0, 3.0, 3.0));
        assert_eq!(i, 1);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn empty_cloud_rejected() {
        // PointCloud::new already rejects empties; exercise the index path
        // through the error type directly.
        assert!(matches!(
            PointCloud::new(vec![], None),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn matches_brute_force_on_random_queries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Point3<f64>> = (0..1000)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let c = cloud_of(points.clone());
        let idx = SpatialIndex::build(&c).unwrap();
        for _ in 0..100 {
            let q = Point3::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            );
            let got = idx.nearest(&q);
            let want = brute_nearest(&points, &q, None);
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() <= 1e-12 * want.1.max(1.0));
        }
    }

    #[test]
    fn tie_break_prefers_lowest_index() {
        // Two stored points equidistant from the query.
        let c = cloud_of(vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 5.0, 0.0),
        ]);
        let idx = SpatialIndex::build(&c).unwrap();
        let (i, _) = idx.nearest(&Point3::new(0.0, 0.0, 0.0));
        assert_eq!(i, 0);
    }

    #[test]
    fn duplicate_points_resolve_to_lowest_index() {
        let c = cloud_of(vec![
            Point3::new(2.0, 2.0, 2.0),
            Point3::new(2.0, 2.0, 2.0),
            Point3::new(2.0, 2.0, 2.0),
        ]);
        let idx = SpatialIndex::build(&c).unwrap();
        assert_eq!(idx.nearest(&Point3::new(2.0, 2.1, 2.0)).0, 0);
        assert_eq!(idx.nearest_excluding(&Point3::new(2.0, 2.0, 2.0), Some(0)).unwrap().0, 1);
    }
}
