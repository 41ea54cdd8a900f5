use thiserror::Error;

use crate::tree::VertexId;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integer overflow computing {0}")]
    Overflow(&'static str),

    #[error("depth {depth} exceeds the configured limit {limit}")]
    DepthLimit { depth: u32, limit: u32 },

    #[error("origin has no predecessor")]
    OriginHasNoParent,

    #[error("power {power} exceeds depth {depth}")]
    PowerExceedsDepth { power: u32, depth: u32 },

    #[error("radius must be positive (got {0})")]
    NonPositiveRadius(f64),

    #[error("the sector of the origin is the whole tree; use total_mass")]
    SectorOfOrigin,

    #[error("region not canonical: {0}")]
    RegionNotCanonical(String),

    #[error("scale mismatch: {set} is not a member of the partition at scale {scale}")]
    ScaleMismatch { set: String, scale: u32 },

    #[error("malformed function: {0}")]
    MalformedFunction(String),

    #[error("level sets need real values (vertex {0} has a nonzero imaginary part)")]
    ComplexLevelSet(VertexId),

    #[error("level too small for CZ: need lambda > {threshold} (= ||f||_1 / mu(X)), got {lambda}")]
    LevelTooSmall { lambda: f64, threshold: f64 },

    #[error("selector undefined at {0}")]
    SelectorUndefined(VertexId),

    #[error("invalid selector: {0}")]
    InvalidSelector(String),

    #[error("not an atom: {0}")]
    NotAnAtom(String),

    #[error("invalid reference measure: {0}")]
    InvalidReferenceMeasure(String),

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NoConvergence { estimate: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
