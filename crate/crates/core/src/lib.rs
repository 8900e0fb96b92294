//! Post-detection analytics for in-situ irradiation microscopy video.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod analytics;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod linking;
pub mod locate;

pub use calibration::Calibration;
pub use error::{Error, Result};
pub use geometry::BoundingBox;
pub use linking::{DefectObservation, Trajectory};
