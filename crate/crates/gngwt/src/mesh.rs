//! Triangle mesh container, watertightness diagnostics, and boundary
//! loop extraction.

use std::collections::BTreeMap;

use nalgebra::Point3;

use crate::cloud::Rgb;
use crate::error::{Error, Result};

/// Indexed triangle surface. Faces hold vertex indices; winding defines
/// the face normal by the right-hand rule.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub colors: Option<Vec<Rgb>>,
}

/// Closed cycle of vertex indices; every consecutive pair (including the
/// wrap-around) is an edge bordering exactly one face.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryLoop {
    pub vertices: Vec<u32>,
}

/// Structural summary used to decide whether a mesh is a closed,
/// consistently oriented 2-manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct WatertightReport {
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    /// Connected components of the face graph (faces adjacent iff they
    /// share an edge). Unreferenced vertices are ignored.
    pub components: usize,
    /// True when no directed edge is traversed twice, i.e. every shared
    /// edge is walked once in each direction.
    pub oriented: bool,
    /// V − E + F counting only vertices referenced by some face.
    pub euler_characteristic: i64,
    pub signed_volume: f64,
}

impl WatertightReport {
    pub fn is_watertight(&self) -> bool {
        self.boundary_edges == 0
            && self.non_manifold_edges == 0
            && self.components == 1
            && self.oriented
            && self.signed_volume > 0.0
    }
}

impl std::fmt::Display for WatertightReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "boundary_edges: {}", self.boundary_edges)?;
        writeln!(f, "non_manifold_edges: {}", self.non_manifold_edges)?;
        writeln!(f, "components: {}", self.components)?;
        writeln!(f, "oriented: {}", self.oriented)?;
        writeln!(f, "euler_characteristic: {}", self.euler_characteristic)?;
        writeln!(f, "signed_volume: {}", self.signed_volume)
    }
}

/// Undirected edge key with endpoints in ascending order.
pub(crate) fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[u32; 3]>,
        colors: Option<Vec<Rgb>>,
    ) -> Result<Self> {
        let mesh = Self {
            vertices,
            faces,
            colors,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Checks the container invariants: indices in range, no degenerate
    /// face, color list length matching the vertex list.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (fi, f) in self.faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateTriangle { face: fi });
            }
            for &v in f {
                if v >= n {
                    return Err(Error::InvalidParams(format!(
                        "face {fi} references vertex {v} out of range 0..{n}"
                    )));
                }
            }
        }
        if let Some(c) = &self.colors {
            if c.len() != self.vertices.len() {
                return Err(Error::ColorCountMismatch {
                    points: self.vertices.len(),
                    colors: c.len(),
                });
            }
        }
        Ok(())
    }

    /// Faces incident to each undirected edge, keyed deterministically.
    pub(crate) fn edge_faces(&self) -> BTreeMap<(u32, u32), Vec<u32>> {
        let mut map: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(f[k], f[(k + 1) % 3]))
                    .or_default()
                    .push(fi as u32);
            }
        }
        map
    }

    /// Six times the enclosed volume is the sum of the triple products;
    /// positive when windings are consistently outward.
    pub fn signed_volume(&self) -> f64 {
        let mut six_v = 0.0;
        for f in &self.faces {
            let a = self.vertices[f[0] as usize].coords;
            let b = self.vertices[f[1] as usize].coords;
            let c = self.vertices[f[2] as usize].coords;
            six_v += a.dot(&b.cross(&c));
        }
        six_v / 6.0
    }

    pub fn watertight_report(&self) -> WatertightReport {
        let edge_faces = self.edge_faces();
        let mut boundary = 0usize;
        let mut non_manifold = 0usize;
        for faces in edge_faces.values() {
            match faces.len() {
                1 => boundary += 1,
                2 => {}
                _ => non_manifold += 1,
            }
        }

        // Orientation: every directed edge must be unique.
        let mut oriented = true;
        let mut directed: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        'faces: for f in &self.faces {
            for k in 0..3 {
                let d = (f[k], f[(k + 1) % 3]);
                let c = directed.entry(d).or_insert(0);
                *c += 1;
                if *c > 1 {
                    oriented = false;
                    break 'faces;
                }
            }
        }

        // Components of the face graph via shared edges.
        let mut uf = UnionFind::new(self.faces.len());
        for faces in edge_faces.values() {
            for w in faces.windows(2) {
                uf.union(w[0] as usize, w[1] as usize);
            }
        }
        let components = if self.faces.is_empty() {
            0
        } else {
            let mut roots: Vec<usize> = (0..self.faces.len()).map(|i| uf.find(i)).collect();
            roots.sort_unstable();
            roots.dedup();
            roots.len()
        };

        let mut referenced = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                referenced[v as usize] = true;
            }
        }
        let v = referenced.iter().filter(|r| **r).count() as i64;
        let e = edge_faces.len() as i64;
        let fc = self.faces.len() as i64;

        WatertightReport {
            boundary_edges: boundary,
            non_manifold_edges: non_manifold,
            components,
            oriented,
            euler_characteristic: v - e + fc,
            signed_volume: self.signed_volume(),
        }
    }

    /// Walks the boundary edges into closed loops. Each loop is returned
    /// in face-traversal direction: for consecutive loop vertices (a, b)
    /// the unique incident face traverses a→b. Boundary configurations
    /// that do not close into a cycle of length ≥ 3 are dropped.
    pub fn boundary_loops(&self) -> Vec<BoundaryLoop> {
        let edge_faces = self.edge_faces();
        // Directed boundary edges as traversed by their single face.
        let mut outgoing: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if edge_faces[&edge_key(a, b)].len() == 1 {
                    debug_assert_eq!(edge_faces[&edge_key(a, b)][0], fi as u32);
                    outgoing.entry(a).or_default().push(b);
                }
            }
        }
        for targets in outgoing.values_mut() {
            targets.sort_unstable();
        }

        let mut loops = Vec::new();
        // Walk from the lowest remaining start vertex; at branches take the
        // lowest unused target so the result is deterministic.
        while let Some((&start, _)) = outgoing.iter().find(|(_, t)| !t.is_empty()) {
            let mut cycle = vec![start];
            let mut current = start;
            loop {
                let Some(targets) = outgoing.get_mut(&current) else {
                    cycle.clear();
                    break;
                };
                if targets.is_empty() {
                    cycle.clear();
                    break;
                }
                let next = targets.remove(0);
                if next == start {
                    break;
                }
                cycle.push(next);
                current = next;
                if cycle.len() > 3 * self.faces.len() + 3 {
                    cycle.clear();
                    break;
                }
            }
            if cycle.len() >= 3 {
                loops.push(BoundaryLoop { vertices: cycle });
            }
        }
        loops
    }
}

/// Path-compressing disjoint-set forest.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    /// Unions by attaching the larger root under the smaller one, so every
    /// class is represented by its lowest member.
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
    }
}
