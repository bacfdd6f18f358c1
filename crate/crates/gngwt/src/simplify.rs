//! Quadric-error-metric edge collapsing for closed meshes. Collapses are
//! rejected whenever they would break the closed-manifold structure, so
//! the result is watertight whenever the input is.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::{Matrix4, Point3, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::mesh::{edge_key, TriangleMesh};

/// Collapses minimum-cost edges until at most `target_faces` faces remain
/// or no further collapse is manifold-safe, and returns the achieved face
/// count. Candidate positions per collapse are the two endpoints and
/// their midpoint. Requires a closed edge-manifold mesh and a target of
/// at least 4 (a tetrahedron is the smallest closed surface).
pub fn simplify(mesh: &mut TriangleMesh, target_faces: usize) -> Result<usize> {
    if target_faces < 4 {
        return Err(Error::InvalidParams(format!(
            "simplification target {target_faces} is below the 4-face minimum"
        )));
    }
    for (&(a, b), fs) in &mesh.edge_faces() {
        if fs.len() != 2 {
            return Err(if fs.len() > 2 {
                Error::NonManifoldEdge {
                    a,
                    b,
                    count: fs.len(),
                }
            } else {
                Error::InvalidParams(format!(
                    "simplification requires a closed mesh; edge ({a}, {b}) is a boundary"
                ))
            });
        }
    }
    if mesh.faces.len() <= target_faces {
        return Ok(mesh.faces.len());
    }

    let mut st = State::new(mesh);
    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::new();
    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    for f in &mesh.faces {
        for k in 0..3 {
            edges.insert(edge_key(f[k], f[(k + 1) % 3]));
        }
    }
    for &(a, b) in &edges {
        heap.push(Reverse(st.candidate(a, b)));
    }

    let mut live_faces = mesh.faces.len();
    while live_faces > target_faces {
        let Some(Reverse(c)) = heap.pop() else {
            break;
        };
        if !st.is_current(&c) {
            continue;
        }
        if live_faces < 6 {
            break; // a collapse would go below the tetrahedron
        }
        if st.try_collapse(&c, &mut heap) {
            live_faces -= 2;
        }
    }

    st.write_back(mesh);
    Ok(mesh.faces.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    version_a: u32,
    version_b: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
            .then(self.version_a.cmp(&other.version_a))
            .then(self.version_b.cmp(&other.version_b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct State {
    positions: Vec<Point3<f64>>,
    quadrics: Vec<Matrix4<f64>>,
    adjacency: Vec<BTreeSet<u32>>,
    incident: Vec<BTreeSet<u32>>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    alive: Vec<bool>,
    versions: Vec<u32>,
    colors: Option<Vec<crate::cloud::Rgb>>,
}

fn face_plane_quadric(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Matrix4<f64> {
    let n = (b - a).cross(&(c - a));
    let norm = n.norm();
    if norm == 0.0 {
        return Matrix4::zeros();
    }
    let n = n / norm;
    let d = -n.dot(&a.coords);
    let v = Vector4::new(n.x, n.y, n.z, d);
    v * v.transpose()
}

fn quadric_cost(q: &Matrix4<f64>, p: &Point3<f64>) -> f64 {
    let h = Vector4::new(p.x, p.y, p.z, 1.0);
    h.dot(&(q * h))
}

fn face_normal(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Vector3<f64> {
    (b - a).cross(&(c - a))
}

impl State {
    fn new(mesh: &TriangleMesh) -> Self {
        let n = mesh.vertices.len();
        let mut st = Self {
            positions: mesh.vertices.clone(),
            quadrics: vec![Matrix4::zeros(); n],
            adjacency: vec![BTreeSet::new(); n],
            incident: vec![BTreeSet::new(); n],
            faces: mesh.faces.clone(),
            face_alive: vec![true; mesh.faces.len()],
            alive: vec![true; n],
            versions: vec![0; n],
            colors: mesh.colors.clone(),
        };
        for (fi, f) in mesh.faces.iter().enumerate() {
            let q = face_plane_quadric(
                &st.positions[f[0] as usize],
                &st.positions[f[1] as usize],
                &st.positions[f[2] as usize],
            );
            for k in 0..3 {
                st.quadrics[f[k] as usize] += q;
                st.incident[f[k] as usize].insert(fi as u32);
                st.adjacency[f[k] as usize].insert(f[(k + 1) % 3]);
                st.adjacency[f[k] as usize].insert(f[(k + 2) % 3]);
            }
        }
        st
    }

    fn candidate(&self, a: u32, b: u32) -> Candidate {
        let (a, b) = edge_key(a, b);
        let q = self.quadrics[a as usize] + self.quadrics[b as usize];
        let cost = self
            .collapse_targets(a, b)
            .iter()
            .map(|p| quadric_cost(&q, p))
            .fold(f64::INFINITY, f64::min);
        Candidate {
            cost,
            a,
            b,
            version_a: self.versions[a as usize],
            version_b: self.versions[b as usize],
        }
    }

    fn collapse_targets(&self, a: u32, b: u32) -> [Point3<f64>; 3] {
        let pa = self.positions[a as usize];
        let pb = self.positions[b as usize];
        [pa, pb, Point3::from((pa.coords + pb.coords) * 0.5)]
    }

    fn is_current(&self, c: &Candidate) -> bool {
        self.alive[c.a as usize]
            && self.alive[c.b as usize]
            && self.versions[c.a as usize] == c.version_a
            && self.versions[c.b as usize] == c.version_b
            && self.adjacency[c.a as usize].contains(&c.b)
    }

    fn face_set(&self, fi: u32) -> [u32; 3] {
        let mut s = self.faces[fi as usize];
        s.sort_unstable();
        s
    }

    /// Applies the collapse if it keeps the mesh a closed 2-manifold and
    /// does not invert any surviving face.
    fn try_collapse(&mut self, c: &Candidate, heap: &mut BinaryHeap<Reverse<Candidate>>) -> bool {
        let (a, b) = (c.a, c.b);
        let (au, bu) = (a as usize, b as usize);

        let shared: Vec<u32> = self.incident[au]
            .intersection(&self.incident[bu])
            .copied()
            .collect();
        if shared.len() != 2 {
            return false;
        }
        // Link condition: the only vertices adjacent to both endpoints may
        // be the two apexes of the shared faces.
        let common: BTreeSet<u32> = self.adjacency[au]
            .intersection(&self.adjacency[bu])
            .copied()
            .collect();
        let mut apexes = BTreeSet::new();
        for &f in &shared {
            for &v in &self.faces[f as usize] {
                if v != a && v != b {
                    apexes.insert(v);
                }
            }
        }
        if apexes.len() != 2 || common != apexes {
            return false;
        }
        // Flap guard: merging must not make two surviving faces identical.
        let a_sets: BTreeSet<[u32; 3]> = self.incident[au]
            .iter()
            .filter(|f| !shared.contains(*f))
            .map(|&f| self.face_set(f))
            .collect();
        for &f in self.incident[bu].iter().filter(|f| !shared.contains(*f)) {
            let mut merged = self.faces[f as usize].map(|v| if v == b { a } else { v });
            merged.sort_unstable();
            if a_sets.contains(&merged) {
                return false;
            }
        }

        let q = self.quadrics[au] + self.quadrics[bu];
        let mut best = self.positions[au];
        let mut best_cost = f64::INFINITY;
        for p in self.collapse_targets(a, b) {
            let cost = quadric_cost(&q, &p);
            if cost < best_cost {
                best_cost = cost;
                best = p;
            }
        }

        // No surviving face around either endpoint may flip its normal.
        for set in [&self.incident[au], &self.incident[bu]] {
            for &f in set.iter().filter(|f| !shared.contains(*f)) {
                let tri = self.faces[f as usize];
                let before = face_normal(
                    &self.positions[tri[0] as usize],
                    &self.positions[tri[1] as usize],
                    &self.positions[tri[2] as usize],
                );
                let moved =
                    tri.map(|v| if v == a || v == b { best } else { self.positions[v as usize] });
                let after = face_normal(&moved[0], &moved[1], &moved[2]);
                if before.dot(&after) <= 0.0 {
                    return false;
                }
            }
        }

        // Commit.
        self.positions[au] = best;
        self.quadrics[au] = q;
        for &f in &shared {
            self.face_alive[f as usize] = false;
            for &v in &self.faces[f as usize] {
                self.incident[v as usize].remove(&f);
            }
        }
        let b_faces: Vec<u32> = self.incident[bu].iter().copied().collect();
        for f in b_faces {
            for v in &mut self.faces[f as usize] {
                if *v == b {
                    *v = a;
                }
            }
            self.incident[au].insert(f);
        }
        self.incident[bu].clear();
        let b_neighbors: Vec<u32> = self.adjacency[bu].iter().copied().collect();
        for x in b_neighbors {
            self.adjacency[x as usize].remove(&b);
            if x != a {
                self.adjacency[x as usize].insert(a);
                self.adjacency[au].insert(x);
            }
        }
        self.adjacency[bu].clear();
        self.adjacency[au].remove(&a);
        self.adjacency[au].remove(&b);
        self.alive[bu] = false;
        self.versions[au] += 1;
        self.versions[bu] += 1;

        // Refresh costs around the survivor; ring edges get new entries
        // too because their link sets changed.
        let neighborhood: Vec<u32> = self.adjacency[au].iter().copied().collect();
        for &x in &neighborhood {
            heap.push(Reverse(self.candidate(a, x)));
        }
        for (i, &x) in neighborhood.iter().enumerate() {
            for &y in &neighborhood[i + 1..] {
                if self.adjacency[x as usize].contains(&y) {
                    heap.push(Reverse(self.candidate(x, y)));
                }
            }
        }
        true
    }

    fn write_back(self, mesh: &mut TriangleMesh) {
        let mut remap = vec![u32::MAX; self.positions.len()];
        let mut vertices = Vec::new();
        let mut colors = self.colors.as_ref().map(|_| Vec::new());
        let mut referenced = vec![false; self.positions.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            if self.face_alive[fi] {
                for &v in f {
                    referenced[v as usize] = true;
                }
            }
        }
        for i in 0..self.positions.len() {
            if self.alive[i] && referenced[i] {
                remap[i] = vertices.len() as u32;
                vertices.push(self.positions[i]);
                if let (Some(out), Some(src)) = (&mut colors, &self.colors) {
                    out.push(src[i]);
                }
            }
        }
        let faces = self
            .faces
            .iter()
            .enumerate()
            .filter(|(fi, _)| self.face_alive[*fi])
            .map(|(_, f)| f.map(|v| remap[v as usize]))
            .collect();
        mesh.vertices = vertices;
        mesh.faces = faces;
        mesh.colors = colors;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::*;

    #[test]
    fn target_at_or_above_current_is_identity() {
        let mut m = icosahedron();
        let before = m.clone();
        assert_eq!(simplify(&mut m, 20).unwrap(), 20);
        assert_eq!(m, before);
        assert_eq!(simplify(&mut m, 500).unwrap(), 20);
        assert_eq!(m, before);
    }

    #[test]
    fn tessellated_cube_reduces_and_stays_watertight() {
        let mut m = tessellated_cube(9);
        assert_eq!(m.faces.len(), 972);
        let achieved = simplify(&mut m, 100).unwrap();
        assert!(achieved <= 100, "achieved {achieved}");
        assert_eq!(achieved, m.faces.len());
        assert_eq!(achieved % 2, 0);
        let r = m.watertight_report();
        assert!(r.is_watertight(), "{r}");
        assert!(
            (r.signed_volume - 1.0).abs() < 0.05,
            "volume drifted to {}",
            r.signed_volume
        );
    }

    #[test]
    fn icosahedron_collapses_toward_tetrahedron() {
        let mut m = icosahedron();
        let achieved = simplify(&mut m, 4).unwrap();
        assert_eq!(achieved, m.faces.len());
        assert!(achieved >= 4);
        assert!(achieved <= 8, "stopped early at {achieved}");
        assert_eq!(achieved % 2, 0);
        let r = m.watertight_report();
        assert!(r.is_watertight(), "{r}");
    }

    #[test]
    fn watertightness_flags_preserved() {
        let mut m = tessellated_cube(5);
        let before = m.watertight_report();
        simplify(&mut m, 60).unwrap();
        let after = m.watertight_report();
        assert_eq!(after.boundary_edges, before.boundary_edges);
        assert_eq!(after.non_manifold_edges, before.non_manifold_edges);
        assert_eq!(after.components, before.components);
        assert_eq!(after.oriented, before.oriented);
        assert_eq!(after.euler_characteristic, 2);
    }

    #[test]
    fn result_is_deterministic() {
        let mut a = tessellated_cube(5);
        let mut b = tessellated_cube(5);
        simplify(&mut a, 40).unwrap();
        simplify(&mut b, 40).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_target_rejected() {
        let mut m = icosahedron();
        assert!(simplify(&mut m, 3).is_err());
    }

    #[test]
    fn open_mesh_rejected() {
        let mut m = cube_missing_bottom();
        assert!(simplify(&mut m, 4).is_err());
    }
}
