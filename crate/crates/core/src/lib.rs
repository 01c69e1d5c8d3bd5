//! Training-free drivable-area detection from one camera image and one LIDAR
//! sweep.
//!
//! The pipeline runs bottom-up:
//!
//! - [`ingest`] reads KITTI files and projects LIDAR points into the image.
//! - [`preprocess`] builds SLIC superpixels and the illumination-invariant
//!   image.
//! - [`obstacle`] labels points from the normals of a pruned Delaunay graph.
//! - [`raymap`] casts polar rays from the bottom-center pixel and seeds the
//!   initial drivable superpixels.
//! - [`features`] learns per-frame Gaussian models for four cues.
//! - [`fusion`] combines the cues with loopy belief propagation.
//! - [`eval`] scores probability maps; [`synth`] makes scenes with exact
//!   ground truth.
//!
//! # Features
//!
//! - `parallel` *(default)*: per-pixel, per-vertex and per-message loops run
//!   on rayon. Results are bit-identical to the sequential build.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod ingest;
pub mod obstacle;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod raymap;
pub mod render;
pub mod synth;

pub use error::{Error, Result};
pub use pipeline::{detect, Detection, PipelineConfig};
