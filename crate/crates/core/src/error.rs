use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension {0} is not supported here")]
    UnsupportedDimension(usize),

    #[error("point {index} lies outside the sampling box")]
    PointOutsideBox { index: usize },

    #[error("region is not contained in the inner box [0, {side}]^d")]
    RegionOutsideBox { side: f64 },

    #[error("component id {id} out of range ({count} components)")]
    InvalidComponent { id: usize, count: usize },

    #[error("site {0:?} is not in the boundary shell")]
    SiteOutsideShell(Vec<usize>),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rational arithmetic overflow")]
    RationalOverflow,

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
