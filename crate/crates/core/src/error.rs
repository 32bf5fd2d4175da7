use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by mesh construction, geometry evaluation and optimisation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("icosphere subdivision level {requested} exceeds the cap of {cap}")]
    SubdivisionCap { requested: u32, cap: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate triangle {triangle} (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("mesh has zero total area")]
    ZeroArea,

    #[error("field length {got} does not match vertex count {expected}")]
    FieldLength { expected: usize, got: usize },

    #[error("{path}:{line}: {message}")]
    ObjParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("reference required: sigma = {sigma} > 0 but no reference surface was given")]
    MissingReference { sigma: f64 },

    #[error("invalid energy parameters: {0}")]
    InvalidParams(String),

    #[error("invalid weight specification: {0}")]
    InvalidWeight(String),

    #[error("non-finite value in {quantity} at vertex {vertex}")]
    NonFinite {
        quantity: &'static str,
        vertex: usize,
    },

    #[error("energy overflow: {0}")]
    Overflow(String),

    #[error("weighted mean curvature vanishes identically (h = 0)")]
    ZeroNorm,

    #[error("sum of H^2 dmu vanishes; area multiplier undefined")]
    ZeroCurvature,

    #[error("mesh degenerated during the run at stage {stage}, iteration {iteration}")]
    Degenerated {
        stage: usize,
        iteration: usize,
        last_good: Box<crate::mesh::TriMesh>,
    },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
