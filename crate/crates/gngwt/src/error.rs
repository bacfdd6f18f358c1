//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// PLY parsing failure. `line` is 1-based for ASCII bodies and headers;
    /// `byte_offset` locates failures inside binary bodies.
    #[error("malformed PLY {path} at {location}: {message}", location = location_str(*.line, *.byte_offset))]
    PlyParse {
        path: PathBuf,
        line: Option<usize>,
        byte_offset: Option<u64>,
        message: String,
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("operation needs at least {needed} points, cloud has {actual}")]
    TooFewPoints { needed: usize, actual: usize },

    #[error("cloud has {points} points but {colors} colors")]
    ColorCountMismatch { points: usize, colors: usize },

    #[error("non-finite coordinate at point {index}")]
    NonFiniteCoordinate { index: usize },

    #[error("model needs at least {needed} neurons, has {actual}")]
    TooFewNeurons { needed: usize, actual: usize },

    #[error("invalid GNG parameters: {0}")]
    InvalidParams(String),

    #[error("mesh has no faces")]
    NoFaces,

    #[error("degenerate triangle {face}: longest edge has zero length")]
    DegenerateTriangle { face: usize },

    #[error("edge ({a}, {b}) borders {count} faces; mesh is not edge-manifold")]
    NonManifoldEdge { a: u32, b: u32, count: usize },

    #[error("surface is non-orientable at edge ({a}, {b})")]
    NonOrientable { a: u32, b: u32 },

    #[error("seed parameters lie outside the search space ({0})")]
    SeedOutOfBounds(String),

    #[error("invalid parameter file {path}: {message}")]
    ParamFile { path: PathBuf, message: String },

    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

fn location_str(line: Option<usize>, byte_offset: Option<u64>) -> String {
    match (line, byte_offset) {
        (Some(l), _) => format!("line {l}"),
        (None, Some(b)) => format!("byte {b}"),
        (None, None) => "unknown location".to_string(),
    }
}
