//! Synthetic test cloud: noise-free surface samples of a cuboid with a
//! sphere dome on its top face and a torus handle through its +x face.
//!
//! The union mixes flat regions, sharp edges, convex curvature, and a
//! genus-1 handle. Points falling inside another primitive are rejected so
//! only the exterior surface of the union is sampled.

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::cloud::PointCloud;
use crate::error::Result;

pub const DEFAULT_DENSITY: f64 = 2500.0;

// Cuboid 1.0 × 0.8 × 0.6 m centered at the origin.
const BOX_HALF: [f64; 3] = [0.5, 0.4, 0.3];
// Sphere centered on the +z face.
const SPHERE_CENTER: [f64; 3] = [0.0, 0.0, 0.3];
const SPHERE_R: f64 = 0.35;
// Torus centered on the +x face, ring in a plane parallel to z = 0.
const TORUS_CENTER: [f64; 3] = [0.5, 0.0, 0.0];
const TORUS_R: f64 = 0.3;
const TORUS_TUBE: f64 = 0.1;

/// A sample on one primitive is kept only when it is at least this far
/// from being inside any other primitive.
const INSIDE_TOL: f64 = 1e-12;

fn box_sdf(p: &Point3<f64>) -> f64 {
    let q = [
        p.x.abs() - BOX_HALF[0],
        p.y.abs() - BOX_HALF[1],
        p.z.abs() - BOX_HALF[2],
    ];
    let outside: f64 = q.iter().map(|c| c.max(0.0).powi(2)).sum::<f64>().sqrt();
    let inside = q[0].max(q[1]).max(q[2]).min(0.0);
    outside + inside
}

fn sphere_sdf(p: &Point3<f64>) -> f64 {
    let d = [
        p.x - SPHERE_CENTER[0],
        p.y - SPHERE_CENTER[1],
        p.z - SPHERE_CENTER[2],
    ];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - SPHERE_R
}

fn torus_sdf(p: &Point3<f64>) -> f64 {
    let dx = p.x - TORUS_CENTER[0];
    let dy = p.y - TORUS_CENTER[1];
    let dz = p.z - TORUS_CENTER[2];
    let ring = (dx * dx + dy * dy).sqrt() - TORUS_R;
    (ring * ring + dz * dz).sqrt() - TORUS_TUBE
}

fn box_area() -> f64 {
    let (x, y, z) = (2.0 * BOX_HALF[0], 2.0 * BOX_HALF[1], 2.0 * BOX_HALF[2]);
    2.0 * (x * y + x * z + y * z)
}

fn sphere_area() -> f64 {
    4.0 * std::f64::consts::PI * SPHERE_R * SPHERE_R
}

fn torus_area() -> f64 {
    4.0 * std::f64::consts::PI * std::f64::consts::PI * TORUS_R * TORUS_TUBE
}

fn sample_box(rng: &mut ChaCha8Rng) -> Point3<f64> {
    let (hx, hy, hz) = (BOX_HALF[0], BOX_HALF[1], BOX_HALF[2]);
    // Pairs of faces weighted by area.
    let a_xy = 2.0 * hx * 2.0 * hy;
    let a_xz = 2.0 * hx * 2.0 * hz;
    let a_yz = 2.0 * hy * 2.0 * hz;
    let pick = rng.gen_range(0.0..a_xy + a_xz + a_yz);
    let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let u = rng.gen_range(-1.0..1.0);
    let v = rng.gen_range(-1.0..1.0);
    if pick < a_xy {
        Point3::new(u * hx, v * hy, side * hz)
    } else if pick < a_xy + a_xz {
        Point3::new(u * hx, side * hy, v * hz)
    } else {
        Point3::new(side * hx, u * hy, v * hz)
    }
}

fn sample_sphere(rng: &mut ChaCha8Rng) -> Point3<f64> {
    let dir: [f64; 3] = UnitSphere.sample(rng);
    Point3::new(
        SPHERE_CENTER[0] + SPHERE_R * dir[0],
        SPHERE_CENTER[1] + SPHERE_R * dir[1],
        SPHERE_CENTER[2] + SPHERE_R * dir[2],
    )
}

fn sample_torus(rng: &mut ChaCha8Rng) -> Point3<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let phi = rng.gen_range(0.0..two_pi);
    // The tube angle is area-weighted: the outer rim of the ring carries
    // more surface than the inner rim.
    let psi = loop {
        let psi = rng.gen_range(0.0..two_pi);
        let w = (TORUS_R + TORUS_TUBE * psi.cos()) / (TORUS_R + TORUS_TUBE);
        if rng.gen::<f64>() < w {
            break psi;
        }
    };
    let ring = TORUS_R + TORUS_TUBE * psi.cos();
    Point3::new(
        TORUS_CENTER[0] + ring * phi.cos(),
        TORUS_CENTER[1] + ring * phi.sin(),
        TORUS_CENTER[2] + TORUS_TUBE * psi.sin(),
    )
}

/// Generates `density` samples per square meter of primitive surface,
/// keeping only points on the exterior of the union. Deterministic for a
/// fixed seed.
pub fn generate_prototype(density: f64, seed: u64) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();

    let plan: [(f64, fn(&mut ChaCha8Rng) -> Point3<f64>, [fn(&Point3<f64>) -> f64; 2]); 3] = [
        (box_area(), sample_box, [sphere_sdf, torus_sdf]),
        (sphere_area(), sample_sphere, [box_sdf, torus_sdf]),
        (torus_area(), sample_torus, [box_sdf, sphere_sdf]),
    ];
    for (area, sample, others) in plan {
        let n = (density * area).round() as usize;
        for _ in 0..n {
            let p = sample(&mut rng);
            if others.iter().all(|sdf| sdf(&p) > -INSIDE_TOL) {
                points.push(p);
            }
        }
    }
    PointCloud::new(points, None)
}
