//! Watertight triangle-mesh reconstruction from noisy point clouds.
//!
//! The pipeline grows a neural-gas graph over the cloud, lifts its
//! triangles to a mesh, and applies deterministic repair (close-edge
//! removal, hole filling, welding, orientation) until the result is
//! watertight. A particle-swarm optimizer tunes the six growth parameters
//! against two competing quality scores: consistency with the input cloud
//! and triangle regularity.
//!
//! Everything is seeded; the same inputs and seed produce bit-identical
//! outputs regardless of the parallel/sequential execution strategy.

pub mod cloud;
pub mod color;
pub mod error;
pub mod exec;
pub mod gng;
pub mod io;
pub mod mesh;
pub mod pipeline;
pub mod pso;
pub mod quality;
pub mod repair;
pub mod simplify;
pub mod spatial;
pub mod synth;

pub use cloud::{PointCloud, Rgb};
pub use error::{Error, Result};
pub use exec::Parallelism;
pub use gng::{EpochTrace, GngModel, GngParams};
pub use mesh::{TriangleMesh, WatertightReport};
pub use pipeline::{PipelineConfig, PipelineSummary};
pub use quality::QualityScores;
