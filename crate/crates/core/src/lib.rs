//! Geometric face data augmentation.
//!
//! Given a face image, a 3D face mesh and its annotations, this crate
//! synthesizes pose-rotated and relit views of the face and carries the
//! annotations (68 landmarks with visibility, identity, age, gender) over to
//! every synthesized view. It also provides the dataset-level planners that
//! decide which images get augmented and the evaluation metrics used to
//! measure downstream models.
//!
//! # Modules
//!
//! - [`mesh`]: triangle mesh, OBJ I/O, symmetry/back planes and a BVH ray oracle.
//! - [`pose`]: scaled-orthographic pose, yaw/pitch composition and the
//!   rotation admissibility gate.
//! - [`texture`]: per-vertex color baking from the source image.
//! - [`render`]: z-buffered software rasterizer with a four-spot light rig.
//! - [`annotate`]: landmark lifting, visibility, projection, label propagation
//!   and 2D alignment.
//! - [`sampler`]: pose groups, yaw entropy and augmentation planners.
//! - [`metrics`]: NME, MAE, ROC, open-set identification and covariate tables.
//! - [`pipeline`]: manifests, run configuration and the end-to-end run.
//! - [`synthetic`]: a procedurally generated symmetric head used by tests.
//!
//! Data-parallel loops go through [`Exec`]; with the `parallel` feature
//! disabled every loop runs sequentially and produces identical output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod error;
pub mod exec;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod pose;
pub mod raster;
pub mod render;
pub mod sampler;
pub mod synthetic;
pub mod texture;

pub use error::{Error, Result};
pub use exec::Exec;

/// Double-precision 3D point.
pub type Point3 = nalgebra::Point3<f64>;
/// Double-precision 3D vector.
pub type Vector3 = nalgebra::Vector3<f64>;
/// Double-precision 2D point, used for pixel coordinates.
pub type Point2 = nalgebra::Point2<f64>;
