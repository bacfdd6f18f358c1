//! Cloud and mesh fixtures shared by the acceptance suite.

use gngwt::cloud::PointCloud;
use gngwt::mesh::TriangleMesh;
use gngwt::synth;
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full synthetic prototype scene (box, sphere, torus) at the default
/// density: ~12k points.
pub fn prototype_cloud(seed: u64) -> PointCloud {
    synth::generate_prototype(synth::DEFAULT_DENSITY, seed).unwrap()
}

/// Copy of `cloud` with the lowest fifth of its points (by z) deleted,
/// simulating a scan that never saw the floor.
pub fn without_bottom(cloud: &PointCloud) -> PointCloud {
    let mut zs: Vec<f64> = cloud.points().iter().map(|p| p.z).collect();
    zs.sort_by(f64::total_cmp);
    let cutoff = zs[cloud.len() / 5];
    let keep: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.points()[i].z >= cutoff)
        .collect();
    let points = keep.iter().map(|&i| cloud.points()[i]).collect();
    let colors = cloud
        .colors()
        .map(|c| keep.iter().map(|&i| c[i]).collect());
    PointCloud::new(points, colors).unwrap()
}

/// Unit cube surface with the bottom face missing.
pub fn open_cube_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let u = rng.gen::<f64>();
        let v = rng.gen::<f64>();
        points.push(match i % 5 {
            0 => Point3::new(u, v, 1.0),
            1 => Point3::new(u, 0.0, v),
            2 => Point3::new(u, 1.0, v),
            3 => Point3::new(0.0, u, v),
            _ => Point3::new(1.0, u, v),
        });
    }
    PointCloud::new(points, None).unwrap()
}

/// Lateral cylinder wall (radius 0.5, height 1.2), both caps open.
pub fn open_cylinder_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let a = rng.gen::<f64>() * std::f64::consts::TAU;
            let z = rng.gen::<f64>() * 1.2;
            Point3::new(0.5 * a.cos(), 0.5 * a.sin(), z)
        })
        .collect();
    PointCloud::new(points, None).unwrap()
}

/// Sphere of radius 0.6 with a polar cap (35 degrees around +z) cut away.
pub fn punctured_sphere_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 35f64.to_radians().cos();
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let z = rng.gen_range(-1.0..=1.0);
        let a = rng.gen::<f64>() * std::f64::consts::TAU;
        if z >= cap {
            continue;
        }
        let r = (1.0 - z * z).sqrt();
        points.push(Point3::new(0.6 * r * a.cos(), 0.6 * r * a.sin(), 0.6 * z));
    }
    PointCloud::new(points, None).unwrap()
}

/// Upper half-sphere of radius 0.7, equator disk open.
pub fn hemisphere_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let z = rng.gen::<f64>();
            let a = rng.gen::<f64>() * std::f64::consts::TAU;
            let r = (1.0 - z * z).sqrt();
            Point3::new(0.7 * r * a.cos(), 0.7 * r * a.sin(), 0.7 * z)
        })
        .collect();
    PointCloud::new(points, None).unwrap()
}

/// Lateral cone wall (base radius 0.5 at z = 0, apex at z = 1), base open.
/// Slant position is sampled with density proportional to local radius so
/// coverage is uniform per unit area.
pub fn open_cone_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let t = rng.gen::<f64>().sqrt();
            let a = rng.gen::<f64>() * std::f64::consts::TAU;
            let r = 0.5 * t;
            Point3::new(r * a.cos(), r * a.sin(), 1.0 - t)
        })
        .collect();
    PointCloud::new(points, None).unwrap()
}

/// Unit cube mesh with its two bottom triangles removed: ten consistently
/// outward-wound faces and a single square boundary loop at z = 0.
pub fn open_box_mesh() -> TriangleMesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(1.0, 0.0, 1.0),
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(0.0, 1.0, 1.0),
    ];
    let faces = vec![
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new(vertices, faces, None).unwrap()
}

/// Prism with a regular `sides`-gon cross-section, coned closed at the
/// top and open at the bottom, leaving one planar boundary loop of
/// `sides` vertices.
pub fn open_prism_mesh(sides: usize) -> TriangleMesh {
    assert!(sides >= 3);
    let s = sides as u32;
    let mut vertices = Vec::with_capacity(2 * sides + 1);
    for z in [0.0, 1.0] {
        for k in 0..sides {
            let a = std::f64::consts::TAU * k as f64 / sides as f64;
            vertices.push(Point3::new(a.cos(), a.sin(), z));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, 1.0));
    let mut faces = Vec::with_capacity(3 * sides);
    for k in 0..s {
        let k1 = (k + 1) % s;
        faces.push([k, k1, s + k1]);
        faces.push([k, s + k1, s + k]);
        faces.push([s + k, s + k1, 2 * s]);
    }
    TriangleMesh::new(vertices, faces, None).unwrap()
}
