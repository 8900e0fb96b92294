use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input fell outside the domain of a conversion.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The input carries no information for the requested statistic
    /// (constant image, empty sample, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("segmentation failed: {0}")]
    SegmentationFailed(String),

    #[error("ellipse fit failed: {0}")]
    FitFailed(String),

    #[error("centroid refinement failed: {0}")]
    RefineFailed(String),

    #[error(
        "subnetwork of {size} particles at frame {frame} exceeds the bound of {limit}; \
         lower the search range"
    )]
    OversizedSubnetwork { frame: u32, size: usize, limit: usize },

    #[error("diffusion undefined: {0}")]
    UndefinedDiffusion(String),

    #[error("unknown schema {found:?} in {path}")]
    UnknownSchema { path: PathBuf, found: Option<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
