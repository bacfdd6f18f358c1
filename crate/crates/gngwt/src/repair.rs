//! Mesh repair stages: close-edge removal on the neuron graph, edge-manifold
//! enforcement, minor-component removal, hole filling, vertex/face
//! deduplication, and orientation. Applied in that order they turn a raw
//! 3-clique mesh into a closed, consistently oriented surface.
//!
//! Every stage is deterministic: iteration follows index order, greedy
//! choices break ties toward lower indices, and hash maps are used for
//! lookup only.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::gng::GngModel;
use crate::mesh::{edge_key, TriangleMesh, UnionFind};

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    if len_sq == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len_sq).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Proximity of the edge pair (v_i–v_j, v_j–v_k) sharing the middle
/// vertex: zero exactly when one edge folds back onto the other.
pub fn chain_proximity(vi: &Point3<f64>, vj: &Point3<f64>, vk: &Point3<f64>) -> f64 {
    point_segment_distance(vi, vj, vk).min(point_segment_distance(vk, vi, vj))
}

/// Removes overlap-artifact edges from the neuron graph: for every chain
/// v_i–v_j–v_k (v_k ≠ v_i), visited in ascending (i, j, k) order, the
/// second edge (v_j, v_k) is dropped when the chain proximity falls below
/// `t_p`. Edges removed earlier are skipped in later chain tests. Returns
/// the number of removed edges.
pub fn remove_close_edges(model: &mut GngModel, t_p: f64) -> Result<usize> {
    if !(t_p.is_finite() && t_p > 0.0) {
        return Err(Error::InvalidParams(format!(
            "edge proximity threshold {t_p} must be positive and finite"
        )));
    }
    let mut removed = 0;
    for i in model.live_indices() {
        for j in model.neighbors(i).to_vec() {
            if model.edge_age(i, j).is_none() {
                continue;
            }
            for k in model.neighbors(j).to_vec() {
                if k == i || model.edge_age(j, k).is_none() {
                    continue;
                }
                let d = chain_proximity(
                    &model.position(i),
                    &model.position(j),
                    &model.position(k),
                );
                if d < t_p {
                    model.remove_edge(j, k);
                    removed += 1;
                }
            }
        }
    }
    Ok(removed)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ManifoldStats {
    pub faces_dropped: usize,
}

/// Keeps a maximal subset of faces in which no undirected edge borders
/// more than two. Faces are admitted greedily by descending shape quality
/// (shortest/longest edge ratio), ties toward the lower face index;
/// duplicate faces (equal as unordered index sets) are dropped outright.
/// Surviving faces keep their original relative order.
pub fn enforce_edge_manifold(mesh: &mut TriangleMesh) -> ManifoldStats {
    let before = mesh.faces.len();
    let mut seen: BTreeSet<[u32; 3]> = BTreeSet::new();
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(before);
    for (fi, f) in mesh.faces.iter().enumerate() {
        let mut sorted = *f;
        sorted.sort_unstable();
        if !seen.insert(sorted) {
            continue;
        }
        ranked.push((face_quality(mesh, f), fi));
    }
    ranked.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut count: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut keep = vec![false; before];
    for (_, fi) in ranked {
        let f = mesh.faces[fi];
        let edges = [
            edge_key(f[0], f[1]),
            edge_key(f[1], f[2]),
            edge_key(f[2], f[0]),
        ];
        if edges.iter().all(|e| count.get(e).copied().unwrap_or(0) < 2) {
            keep[fi] = true;
            for e in edges {
                *count.entry(e).or_insert(0) += 1;
            }
        }
    }
    let mut kept = Vec::with_capacity(before);
    for (fi, f) in mesh.faces.iter().enumerate() {
        if keep[fi] {
            kept.push(*f);
        }
    }
    mesh.faces = kept;
    ManifoldStats {
        faces_dropped: before - mesh.faces.len(),
    }
}

fn face_quality(mesh: &TriangleMesh, f: &[u32; 3]) -> f64 {
    let a = mesh.vertices[f[0] as usize];
    let b = mesh.vertices[f[1] as usize];
    let c = mesh.vertices[f[2] as usize];
    let l = [(b - a).norm(), (c - b).norm(), (a - c).norm()];
    let max = l[0].max(l[1]).max(l[2]);
    if max == 0.0 {
        return 0.0;
    }
    l[0].min(l[1]).min(l[2]) / max
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ComponentStats {
    pub components_dropped: usize,
    pub faces_dropped: usize,
}

/// Keeps only the largest face-connected component (faces adjacent iff
/// they share an edge); ties go to the component containing the lowest
/// face index.
pub fn drop_minor_components(mesh: &mut TriangleMesh) -> ComponentStats {
    if mesh.faces.is_empty() {
        return ComponentStats::default();
    }
    let mut uf = UnionFind::new(mesh.faces.len());
    for faces in mesh.edge_faces().values() {
        for w in faces.windows(2) {
            uf.union(w[0] as usize, w[1] as usize);
        }
    }
    let roots: Vec<usize> = (0..mesh.faces.len()).map(|f| uf.find(f)).collect();
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in &roots {
        *sizes.entry(r).or_insert(0) += 1;
    }
    // BTreeMap iterates roots ascending, so on ties the earliest (lowest
    // root = lowest member face) wins.
    let (&winner, _) = sizes
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .expect("non-empty face list");
    let before = mesh.faces.len();
    let mut kept = Vec::with_capacity(before);
    for (fi, f) in mesh.faces.iter().enumerate() {
        if roots[fi] == winner {
            kept.push(*f);
        }
    }
    mesh.faces = kept;
    ComponentStats {
        components_dropped: sizes.len() - 1,
        faces_dropped: before - mesh.faces.len(),
    }
}

/// Least-squares plane through a point set: (centroid, unit normal). The
/// normal is the covariance eigenvector of the smallest eigenvalue; its
/// sign is arbitrary but deterministic.
pub fn lsq_plane(points: &[Point3<f64>]) -> (Point3<f64>, Vector3<f64>) {
    let n = points.len().max(1) as f64;
    let mut centroid = Vector3::zeros();
    for p in points {
        centroid += p.coords;
    }
    centroid /= n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut imin = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
    }
    (Point3::from(centroid), eig.eigenvectors.column(imin).into_owned())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FillStats {
    pub loops_closed: usize,
    pub faces_added: usize,
    /// Loops whose projected polygon could not be ear-clipped and were fan
    /// triangulated from a newly added centroid vertex instead.
    pub fallback_vertices: usize,
    /// Loops left open because closing them would have put a third face on
    /// some edge.
    pub loops_skipped: usize,
}

/// Triangulates every boundary loop. Loop vertices are projected onto
/// their least-squares plane and ear-clipped there, so the patch stays
/// planar and introduces no vertices; a loop whose projection degenerates
/// or self-intersects is fan-filled from its centroid (one new vertex).
/// New triangles wind opposite to the boundary traversal, preserving any
/// orientation consistency the mesh already has.
pub fn fill_holes(mesh: &mut TriangleMesh) -> FillStats {
    let loops = mesh.boundary_loops();
    // Live incidence counts, so ear diagonals never land on an edge that
    // is (or becomes) fully paired — that would over-fill it.
    let mut edge_count: BTreeMap<(u32, u32), u32> = mesh
        .edge_faces()
        .into_iter()
        .map(|(e, fs)| (e, fs.len() as u32))
        .collect();
    let mut stats = FillStats::default();
    for lp in loops {
        // A walk may pass through a pinch vertex twice; patch each simple
        // cycle on its own so fan spokes stay two-faced.
        for cycle in split_simple_cycles(&lp.vertices) {
            fill_loop(mesh, &cycle, &mut edge_count, &mut stats);
        }
    }
    stats
}

/// Splits a closed walk into vertex-simple cycles, preserving traversal
/// order. Cycles shorter than a triangle are discarded.
fn split_simple_cycles(ring: &[u32]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut stack: Vec<u32> = Vec::new();
    for &v in ring {
        if let Some(pos) = stack.iter().position(|&x| x == v) {
            let cycle = stack.split_off(pos);
            stack.push(v);
            if cycle.len() >= 3 {
                out.push(cycle);
            }
        } else {
            stack.push(v);
        }
    }
    if stack.len() >= 3 {
        out.push(stack);
    }
    out
}

fn push_fill_face(
    mesh: &mut TriangleMesh,
    edge_count: &mut BTreeMap<(u32, u32), u32>,
    face: [u32; 3],
    stats: &mut FillStats,
) {
    for k in 0..3 {
        *edge_count.entry(edge_key(face[k], face[(k + 1) % 3])).or_insert(0) += 1;
    }
    mesh.faces.push(face);
    stats.faces_added += 1;
}

fn fan_from_centroid(
    mesh: &mut TriangleMesh,
    ring: &[u32],
    edge_count: &mut BTreeMap<(u32, u32), u32>,
    stats: &mut FillStats,
) {
    // Every ring edge gains one fan face; an already-paired edge would
    // end up with three, so such a loop stays open.
    let full = ring.iter().enumerate().any(|(i, &a)| {
        let b = ring[(i + 1) % ring.len()];
        edge_count.get(&edge_key(a, b)).copied().unwrap_or(0) >= 2
    });
    if full {
        log::warn!("leaving a boundary loop open: an edge already carries two faces");
        stats.loops_skipped += 1;
        return;
    }
    let mut centroid = Vector3::zeros();
    for &v in ring {
        centroid += mesh.vertices[v as usize].coords;
    }
    centroid /= ring.len() as f64;
    let c = mesh.vertices.len() as u32;
    mesh.vertices.push(Point3::from(centroid));
    if let Some(colors) = &mut mesh.colors {
        let fallback = colors[ring[0] as usize];
        colors.push(fallback);
    }
    for i in 0..ring.len() {
        let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
        push_fill_face(mesh, edge_count, [b, a, c], stats);
    }
    stats.fallback_vertices += 1;
    stats.loops_closed += 1;
}

fn fill_loop(
    mesh: &mut TriangleMesh,
    ring: &[u32],
    edge_count: &mut BTreeMap<(u32, u32), u32>,
    stats: &mut FillStats,
) {
    let pts: Vec<Point3<f64>> = ring.iter().map(|&v| mesh.vertices[v as usize]).collect();
    let (centroid, normal) = lsq_plane(&pts);
    let helper = if normal.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = normal.cross(&helper).normalize();
    let v = normal.cross(&u);
    // (vertex index, in-plane coordinates), in loop order.
    let mut poly: Vec<(u32, f64, f64)> = ring
        .iter()
        .zip(&pts)
        .map(|(&idx, p)| {
            let d = p - centroid;
            (idx, d.dot(&u), d.dot(&v))
        })
        .collect();

    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(_, x, y) in &poly {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let scale_sq = (max_x - min_x).powi(2) + (max_y - min_y).powi(2);
    let eps = 1e-12 * scale_sq;

    let mut area2 = 0.0;
    for i in 0..poly.len() {
        let (_, x0, y0) = poly[i];
        let (_, x1, y1) = poly[(i + 1) % poly.len()];
        area2 += x0 * y1 - x1 * y0;
    }
    if area2.abs() <= eps {
        fan_from_centroid(mesh, ring, edge_count, stats);
        return;
    }
    let turn = area2.signum();

    while poly.len() > 3 {
        let n = poly.len();
        let mut clipped = false;
        for c in 0..n {
            let ip = poly[(c + n - 1) % n];
            let ic = poly[c];
            let inx = poly[(c + 1) % n];
            let cross = (ic.1 - ip.1) * (inx.2 - ic.2) - (ic.2 - ip.2) * (inx.1 - ic.1);
            if cross * turn <= eps {
                continue; // reflex or collinear corner
            }
            let count = |x: u32, y: u32| edge_count.get(&edge_key(x, y)).copied().unwrap_or(0);
            if count(ip.0, inx.0) >= 1 {
                continue; // diagonal already carries a face
            }
            if count(ip.0, ic.0) >= 2 || count(ic.0, inx.0) >= 2 {
                continue; // a polygon side is already fully paired
            }
            let blocked = poly.iter().enumerate().any(|(k, q)| {
                k != (c + n - 1) % n
                    && k != c
                    && k != (c + 1) % n
                    && point_in_tri_2d(q, &ip, &ic, &inx, turn, eps)
            });
            if blocked {
                continue;
            }
            // Reversed relative to loop order: the patch opposes the
            // traversal of the existing faces.
            push_fill_face(mesh, edge_count, [inx.0, ic.0, ip.0], stats);
            poly.remove(c);
            clipped = true;
            break;
        }
        if !clipped {
            let remaining: Vec<u32> = poly.iter().map(|p| p.0).collect();
            fan_from_centroid(mesh, &remaining, edge_count, stats);
            return;
        }
    }

    let closing = [poly[2].0, poly[1].0, poly[0].0];
    let full = (0..3).any(|k| {
        edge_count
            .get(&edge_key(closing[k], closing[(k + 1) % 3]))
            .copied()
            .unwrap_or(0)
            >= 2
    });
    if full {
        let remaining: Vec<u32> = poly.iter().map(|p| p.0).collect();
        fan_from_centroid(mesh, &remaining, edge_count, stats);
    } else {
        push_fill_face(mesh, edge_count, closing, stats);
        stats.loops_closed += 1;
    }
}

/// Inside-or-on-boundary test against the oriented triangle (p1, p2, p3).
fn point_in_tri_2d(
    q: &(u32, f64, f64),
    p1: &(u32, f64, f64),
    p2: &(u32, f64, f64),
    p3: &(u32, f64, f64),
    turn: f64,
    eps: f64,
) -> bool {
    for (s, e) in [(p1, p2), (p2, p3), (p3, p1)] {
        let cross = (e.1 - s.1) * (q.2 - s.2) - (e.2 - s.2) * (q.1 - s.1);
        if cross * turn < -eps {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DedupStats {
    pub vertices_welded: usize,
    pub faces_dropped: usize,
    pub vertices_pruned: usize,
}

/// Welds vertices within `weld_eps` of each other (union-find over a
/// uniform spatial grid; each class keeps its lowest-index member's
/// position), drops faces that became degenerate or duplicate, and prunes
/// vertices no face references. `weld_eps = 0` welds exact duplicates
/// only. Idempotent: a second pass finds nothing to do.
pub fn dedup(mesh: &mut TriangleMesh, weld_eps: f64) -> Result<DedupStats> {
    if !weld_eps.is_finite() || weld_eps < 0.0 {
        return Err(Error::InvalidParams(format!(
            "weld distance {weld_eps} must be non-negative and finite"
        )));
    }
    let n = mesh.vertices.len();
    let cell = if weld_eps > 0.0 { weld_eps } else { 1.0 };
    let cell_of = |p: &Point3<f64>| -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    // Lookup only; all iteration below is in vertex-index order.
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in mesh.vertices.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i as u32);
    }
    let eps_sq = weld_eps * weld_eps;
    let mut uf = UnionFind::new(n);
    for (i, p) in mesh.vertices.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(list) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in list {
                        let j = j as usize;
                        if j > i
                            && (mesh.vertices[j] - mesh.vertices[i]).norm_squared() <= eps_sq
                        {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
    }
    let reps: Vec<u32> = (0..n).map(|i| uf.find(i) as u32).collect();
    let vertices_welded = (0..n).filter(|&i| reps[i] != i as u32).count();

    let before_faces = mesh.faces.len();
    let mut seen: BTreeSet<[u32; 3]> = BTreeSet::new();
    let mut faces: Vec<[u32; 3]> = Vec::with_capacity(before_faces);
    for f in &mesh.faces {
        let g = f.map(|v| reps[v as usize]);
        if g[0] == g[1] || g[1] == g[2] || g[0] == g[2] {
            continue;
        }
        let mut sorted = g;
        sorted.sort_unstable();
        if seen.insert(sorted) {
            faces.push(g);
        }
    }
    let faces_dropped = before_faces - faces.len();

    // Renumber. Welded-away vertices are unreferenced by construction; of
    // the representatives, only those a face still uses survive — unless
    // the mesh has no faces at all, in which case representatives stay.
    let mut referenced = vec![faces.is_empty(); n];
    for f in &faces {
        for &v in f {
            referenced[v as usize] = true;
        }
    }
    let mut vertices_pruned = 0;
    let mut remap = vec![u32::MAX; n];
    let mut vertices = Vec::new();
    let mut colors = mesh.colors.as_ref().map(|_| Vec::new());
    for i in 0..n {
        let is_rep = reps[i] == i as u32;
        if is_rep && referenced[i] {
            remap[i] = vertices.len() as u32;
            vertices.push(mesh.vertices[i]);
            if let (Some(out), Some(src)) = (&mut colors, &mesh.colors) {
                out.push(src[i]);
            }
        } else if is_rep {
            vertices_pruned += 1;
        }
    }
    for f in &mut faces {
        *f = f.map(|v| remap[v as usize]);
    }
    mesh.vertices = vertices;
    mesh.faces = faces;
    mesh.colors = colors;
    Ok(DedupStats {
        vertices_welded,
        faces_dropped,
        vertices_pruned,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrientabilityStats {
    pub faces_dropped: usize,
}

/// Dry-run winding propagation on a scratch copy; returns the first edge
/// where consistency is impossible, or `None` for an orientable mesh.
fn orientation_conflict(
    faces: &[[u32; 3]],
    edge_faces: &BTreeMap<(u32, u32), Vec<u32>>,
) -> Option<(u32, u32)> {
    let mut work = faces.to_vec();
    let mut visited = vec![false; work.len()];
    for seed in 0..work.len() {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(f) = queue.pop_front() {
            let face = work[f];
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                for &g in &edge_faces[&edge_key(a, b)] {
                    let g = g as usize;
                    if g == f {
                        continue;
                    }
                    let same_direction = traverses(&work[g], a, b);
                    if !visited[g] {
                        if same_direction {
                            work[g].swap(1, 2);
                        }
                        visited[g] = true;
                        queue.push_back(g);
                    } else if same_direction {
                        return Some(edge_key(a, b));
                    }
                }
            }
        }
    }
    None
}

/// Deletes faces until winding consistency becomes achievable (3-clique
/// extraction can produce genuinely non-orientable patches on sparse
/// input). Each round drops the highest-index face on the first
/// conflicting edge, so the result is deterministic. Requires an
/// edge-manifold mesh.
pub fn enforce_orientability(mesh: &mut TriangleMesh) -> Result<OrientabilityStats> {
    let mut dropped = 0;
    loop {
        let edge_faces = mesh.edge_faces();
        for (&(a, b), fs) in &edge_faces {
            if fs.len() > 2 {
                return Err(Error::NonManifoldEdge {
                    a,
                    b,
                    count: fs.len(),
                });
            }
        }
        match orientation_conflict(&mesh.faces, &edge_faces) {
            None => return Ok(OrientabilityStats { faces_dropped: dropped }),
            Some((a, b)) => {
                let victim = mesh
                    .faces
                    .iter()
                    .rposition(|f| traverses(f, a, b) || traverses(f, b, a))
                    .expect("conflict edge must belong to some face");
                mesh.faces.remove(victim);
                dropped += 1;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrientStats {
    pub faces_flipped: usize,
    pub globally_flipped: bool,
}

/// Makes face windings consistent by breadth-first propagation across
/// shared edges, then flips everything if the signed volume came out
/// negative so normals point outward. Requires an edge-manifold mesh;
/// fails on non-orientable surfaces.
pub fn orient(mesh: &mut TriangleMesh) -> Result<OrientStats> {
    let edge_faces = mesh.edge_faces();
    for (&(a, b), fs) in &edge_faces {
        if fs.len() > 2 {
            return Err(Error::NonManifoldEdge {
                a,
                b,
                count: fs.len(),
            });
        }
    }

    let nf = mesh.faces.len();
    let mut visited = vec![false; nf];
    let mut flipped = 0;
    for seed in 0..nf {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(f) = queue.pop_front() {
            let face = mesh.faces[f];
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                for &g in &edge_faces[&edge_key(a, b)] {
                    let g = g as usize;
                    if g == f {
                        continue;
                    }
                    // Consistency demands the neighbor traverse b→a.
                    let same_direction = traverses(&mesh.faces[g], a, b);
                    if !visited[g] {
                        if same_direction {
                            mesh.faces[g].swap(1, 2);
                            flipped += 1;
                        }
                        visited[g] = true;
                        queue.push_back(g);
                    } else if same_direction {
                        let (a, b) = edge_key(a, b);
                        return Err(Error::NonOrientable { a, b });
                    }
                }
            }
        }
    }

    let globally_flipped = mesh.signed_volume() < 0.0;
    if globally_flipped {
        for f in &mut mesh.faces {
            f.swap(1, 2);
        }
    }
    Ok(OrientStats {
        faces_flipped: flipped,
        globally_flipped,
    })
}

fn traverses(face: &[u32; 3], a: u32, b: u32) -> bool {
    (0..3).any(|k| face[k] == a && face[(k + 1) % 3] == b)
}
