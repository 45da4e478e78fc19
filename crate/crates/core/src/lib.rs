//! Class-agnostic object proposal tooling: anchors, label assignment,
//! losses, post-processing, crop-and-rescale and COCO-style evaluation.

pub mod anchors;
pub mod assignment;
pub mod coco;
pub mod config;
pub mod crop;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod matrix;
pub mod postprocess;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{BBox, BoxDelta, ImageSize};
pub use matrix::Matrix;
pub use postprocess::Detection;
