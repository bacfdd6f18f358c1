//! Per-vertex color restoration: after training and repair the mesh
//! vertices no longer coincide with input points, so each vertex takes
//! the color of its nearest cloud point (no blending).

use crate::cloud::PointCloud;
use crate::error::Result;
use crate::exec::Parallelism;
use crate::mesh::TriangleMesh;
use crate::spatial::SpatialIndex;

/// Returns `true` if colors were applied, `false` when the cloud carries
/// none (the mesh is left untouched). Geometry is never modified. Ties
/// between equidistant cloud points resolve to the lowest point index.
pub fn restore_colors(
    mesh: &mut TriangleMesh,
    cloud: &PointCloud,
    index: &SpatialIndex,
    par: Parallelism,
) -> Result<bool> {
    let Some(palette) = cloud.colors() else {
        log::warn!("input cloud has no colors; skipping color restoration");
        return Ok(false);
    };
    let colors = par.map(&mesh.vertices, |v| {
        let (i, _) = index.nearest(v);
        palette[i as usize]
    });
    mesh.colors = Some(colors);
    Ok(true)
}
