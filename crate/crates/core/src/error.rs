use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("sampler failure: {0}")]
    SamplerFailure(String),

    #[error("covariance is rank deficient (smallest eigenvalue {0:e})")]
    RankDeficient(f64),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("point is not in the span of the generators (residual {0:e})")]
    UnreachablePoint(f64),

    #[error("polar body is unbounded: generators do not span the space")]
    UnboundedPolar,

    #[error("linear map is singular (|det| = {0:e})")]
    SingularMap(f64),

    #[error("unsupported dimension {0}: {1}")]
    UnsupportedDimension(usize, String),

    #[error("bounding radius {radius} does not contain the body (needs {needed})")]
    InvalidBound { radius: f64, needed: f64 },

    #[error("sampling produced no members of the set after {0} draws")]
    EmptySet(usize),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("grid too coarse: resolution {0} < 8")]
    TooCoarse(usize),

    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl GlabError {
    /// Process exit status: 2 for usage and validation problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            GlabError::InvalidInput(_)
            | GlabError::UnsupportedFamily(_)
            | GlabError::UnsupportedDimension(..)
            | GlabError::InvalidBound { .. }
            | GlabError::TooCoarse(_)
            | GlabError::Usage(_)
            | GlabError::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, GlabError>;

impl From<std::io::Error> for GlabError {
    fn from(e: std::io::Error) -> Self {
        GlabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for GlabError {
    fn from(e: serde_json::Error) -> Self {
        GlabError::Usage(e.to_string())
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(GlabError::InvalidInput(msg.into()))
}
