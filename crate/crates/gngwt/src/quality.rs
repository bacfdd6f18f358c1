//! Mesh quality criteria: consistency error ε (how far neurons strayed
//! from the cloud, computed in [`crate::gng`]), mean edge length ratio η
//! (triangle shape uniformity), and the strict-Pareto acceptance test θ
//! that the swarm optimizer uses to compare (ε, η) pairs.

use nalgebra::Point3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::mesh::TriangleMesh;

/// Score pair for one reconstruction: lower is better in both fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityScores {
    /// Mean neuron-to-cloud distance, meters.
    pub epsilon: f64,
    /// 1 − mean(shortest/longest edge per triangle), in [0, 1).
    pub eta: f64,
}

/// Mean edge length ratio: 0 for all-equilateral meshes, approaching 1 as
/// triangles degenerate into slivers.
pub fn eta(mesh: &TriangleMesh) -> Result<f64> {
    eta_with(mesh, Parallelism::default())
}

pub fn eta_with(mesh: &TriangleMesh, par: Parallelism) -> Result<f64> {
    if mesh.faces.is_empty() {
        return Err(Error::NoFaces);
    }
    let ratios = par.map_indexed(&mesh.faces, |fi, f| {
        let a = mesh.vertices[f[0] as usize];
        let b = mesh.vertices[f[1] as usize];
        let c = mesh.vertices[f[2] as usize];
        let l = [(b - a).norm(), (c - b).norm(), (a - c).norm()];
        let max = l[0].max(l[1]).max(l[2]);
        if max == 0.0 {
            return Err(Error::DegenerateTriangle { face: fi });
        }
        Ok(l[0].min(l[1]).min(l[2]) / max)
    });
    let mut sum = 0.0;
    for r in ratios {
        sum += r?;
    }
    Ok(1.0 - sum / mesh.faces.len() as f64)
}

/// True iff `next` strictly Pareto-improves on `prev`: one criterion
/// strictly better, the other at least as good.
pub fn theta(prev: &QualityScores, next: &QualityScores) -> bool {
    (next.epsilon < prev.epsilon && next.eta <= prev.eta)
        || (next.epsilon <= prev.epsilon && next.eta < prev.eta)
}

/// Symmetric Hausdorff distance between the cloud and a vertex set, by
/// exhaustive search. Diagnostic only: quadratic cost keeps it out of the
/// pipeline.
pub fn hausdorff_oracle(cloud: &PointCloud, vertices: &[Point3<f64>]) -> Result<f64> {
    if vertices.is_empty() {
        return Err(Error::TooFewNeurons {
            needed: 1,
            actual: 0,
        });
    }
    let directed = |from: &[Point3<f64>], to: &[Point3<f64>]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(cloud.points(), vertices).max(directed(vertices, cloud.points())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gng::GngModel;
    use crate::spatial::SpatialIndex;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    fn tri(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>) -> TriangleMesh {
        TriangleMesh::new(vec![a, b, c], vec![[0, 1, 2]], None).unwrap()
    }

    #[test]
    fn equilateral_triangle_scores_zero() {
        // All edges are √2 computed from the same bit pattern.
        let m = tri(p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(0.0, 0.0, 1.0));
        assert_eq!(eta(&m).unwrap(), 0.0);
    }

    #[test]
    fn right_triangle_345_scores_two_fifths() {
        let m = tri(p(0.0, 0.0, 0.0), p(3.0, 0.0, 0.0), p(0.0, 4.0, 0.0));
        assert_eq!(eta(&m).unwrap(), 0.4);
    }

    #[test]
    fn empty_and_degenerate_meshes_error() {
        let empty = TriangleMesh::new(vec![p(0.0, 0.0, 0.0)], vec![], None).unwrap();
        assert!(matches!(eta(&empty), Err(Error::NoFaces)));
        // Distinct indices, coincident positions.
        let zero = TriangleMesh::new(
            vec![p(1.0, 1.0, 1.0), p(1.0, 1.0, 1.0), p(1.0, 1.0, 1.0)],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap();
        assert!(matches!(
            eta(&zero),
            Err(Error::DegenerateTriangle { face: 0 })
        ));
    }

    #[test]
    fn theta_examples() {
        let s = |epsilon, eta| QualityScores { epsilon, eta };
        assert!(theta(&s(2.0, 0.3), &s(1.0, 0.3)));
        assert!(!theta(&s(1.0, 0.3), &s(1.0, 0.3)));
        assert!(!theta(&s(1.0, 0.3), &s(2.0, 0.1)));
        // Strict improvement in eta alone also qualifies.
        assert!(theta(&s(1.0, 0.3), &s(1.0, 0.2)));
    }

    #[test]
    fn theta_truth_table() {
        // Each factor runs over {improved, equal, worsened}.
        let deltas = [-1.0, 0.0, 1.0];
        let prev = QualityScores {
            epsilon: 5.0,
            eta: 0.5,
        };
        let mut accepted = Vec::new();
        for de in deltas {
            for dn in deltas {
                let next = QualityScores {
                    epsilon: prev.epsilon + de,
                    eta: prev.eta + dn * 0.1,
                };
                if theta(&prev, &next) {
                    accepted.push((de, dn));
                }
            }
        }
        assert_eq!(accepted, vec![(-1.0, -1.0), (-1.0, 0.0), (0.0, -1.0)]);
    }

    proptest! {
        #[test]
        fn theta_is_irreflexive_and_antisymmetric(
            e1 in 0.0..10.0f64, n1 in 0.0..1.0f64,
            e2 in 0.0..10.0f64, n2 in 0.0..1.0f64,
        ) {
            let a = QualityScores { epsilon: e1, eta: n1 };
            let b = QualityScores { epsilon: e2, eta: n2 };
            prop_assert!(!theta(&a, &a));
            prop_assert!(!(theta(&a, &b) && theta(&b, &a)));
        }

        #[test]
        fn eta_is_scale_invariant(scale in 0.1..10.0f64, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vertices: Vec<Point3<f64>> = (0..9)
                .map(|_| p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let faces = vec![[0u32, 1, 2], [3, 4, 5], [6, 7, 8]];
            let m = TriangleMesh::new(vertices.clone(), faces.clone(), None).unwrap();
            let scaled = TriangleMesh::new(
                vertices.iter().map(|v| Point3::from(v.coords * scale)).collect(),
                faces,
                None,
            )
            .unwrap();
            let (a, b) = (eta(&m).unwrap(), eta(&scaled).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn epsilon_scales_linearly_with_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts: Vec<Point3<f64>> = (0..200)
            .map(|_| p(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let neurons: Vec<Point3<f64>> = (0..40)
            .map(|_| p(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let scale = 3.7;
        let cloud = PointCloud::new(pts.clone(), None).unwrap();
        let scaled_cloud = PointCloud::new(
            pts.iter().map(|q| Point3::from(q.coords * scale)).collect(),
            None,
        )
        .unwrap();
        let model =
            GngModel::from_parts(neurons.clone(), vec![0.0; neurons.len()], &[]).unwrap();
        let scaled_model = GngModel::from_parts(
            neurons.iter().map(|q| Point3::from(q.coords * scale)).collect(),
            vec![0.0; neurons.len()],
            &[],
        )
        .unwrap();
        let e1 = model
            .consistency_error(&SpatialIndex::build(&cloud).unwrap())
            .unwrap();
        let e2 = scaled_model
            .consistency_error(&SpatialIndex::build(&scaled_cloud).unwrap())
            .unwrap();
        assert!((e2 - scale * e1).abs() <= 1e-12 * e2.max(1.0));
    }

    #[test]
    fn hausdorff_examples() {
        let cloud = PointCloud::new(vec![p(0.0, 0.0, 0.0)], None).unwrap();
        assert_eq!(
            hausdorff_oracle(&cloud, &[p(0.0, 0.0, 0.0)]).unwrap(),
            0.0
        );
        assert_eq!(hausdorff_oracle(&cloud, &[p(3.0, 4.0, 0.0)]).unwrap(), 5.0);
        assert!(hausdorff_oracle(&cloud, &[]).is_err());
    }

    // Independent re-evaluation with explicit loops instead of iterator
    // folds.
    #[test]
    fn hausdorff_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a: Vec<Point3<f64>> = (0..100)
            .map(|_| p(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let b: Vec<Point3<f64>> = (0..100)
            .map(|_| p(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let mut expected = 0.0f64;
        for (from, to) in [(&a, &b), (&b, &a)] {
            for q in from.iter() {
                let mut nearest = f64::INFINITY;
                for r in to.iter() {
                    let d = (q - r).norm();
                    if d < nearest {
                        nearest = d;
                    }
                }
                if nearest > expected {
                    expected = nearest;
                }
            }
        }
        let cloud = PointCloud::new(a, None).unwrap();
        assert_eq!(hausdorff_oracle(&cloud, &b).unwrap(), expected);
    }
}
