//! Point cloud data model.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::spatial::SpatialIndex;

/// Per-point color, 8 bits per channel.
pub type Rgb = [u8; 3];

/// An unordered set of 3-D sample positions in meters, optionally colored.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    colors: Option<Vec<Rgb>>,
}

impl PointCloud {
    /// Builds a cloud, validating that every coordinate is finite, that the
    /// cloud is non-empty, and that the color list (if any) matches the
    /// point list in length.
    pub fn new(points: Vec<Point3<f64>>, colors: Option<Vec<Rgb>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::NonFiniteCoordinate { index: i });
            }
        }
        if let Some(c) = &colors {
            if c.len() != points.len() {
                return Err(Error::ColorCountMismatch {
                    points: points.len(),
                    colors: c.len(),
                });
            }
        }
        Ok(Self { points, colors })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    pub fn has_colors(&self) -> bool {
        self.colors.is_some()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut min = self.points[0];
        let mut max = self.points[0];
        for p in &self.points[1..] {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        (min, max)
    }

    /// Median over all points of the distance to the nearest *other* point.
    ///
    /// This is the cloud's resolution estimate; it feeds the training noise
    /// amplitude and the diverged-neuron threshold.
    pub fn median_nn_spacing(&self) -> Result<f64> {
        self.median_nn_spacing_with(Parallelism::default())
    }

    /// Same as [`median_nn_spacing`](Self::median_nn_spacing) with an explicit
    /// execution strategy.
    pub fn median_nn_spacing_with(&self, par: Parallelism) -> Result<f64> {
        if self.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                actual: self.len(),
            });
        }
        let index = SpatialIndex::build(self)?;
        let mut dists = par.map_indexed(&self.points, |i, p| {
            index
                .nearest_excluding(p, Some(i as u32))
                .expect("cloud has >= 2 points")
                .1
        });
        dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let n = dists.len();
        if n % 2 == 1 {
            Ok(dists[n / 2])
        } else {
            Ok(0.5 * (dists[n / 2 - 1] + dists[n / 2]))
        }
    }
}
