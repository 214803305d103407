//! silfit: camera pose estimation from object silhouettes.
//!
//! Given a collection of segmented images and one or more untextured mesh
//! templates, this crate estimates a per-image camera (rotation, scale,
//! screen translation, perspective correction) by fitting rendered template
//! silhouettes to the target masks with a soft differentiable rasterizer.
//! Silhouette-only fits are inherently ambiguous for near-symmetric objects,
//! so the pipeline detects ambiguous images via a hypothesis agreement score,
//! infers a per-vertex semantic layout for each template from the confident
//! images, and uses it to resolve the remaining ambiguities.
//!
//! Main building blocks:
//! - [`geom`]: meshes, quaternions, and the augmented weak-perspective camera.
//! - [`render`]: soft silhouette rasterizer with exact forward-mode camera
//!   gradients, hard vertex-color rendering and its adjoint splat.
//! - [`optim`]: full-matrix-preconditioned Adam and scheduled momentum SGD.
//! - [`pipeline`]: multi-hypothesis silhouette optimization, scoring,
//!   ambiguity detection and resolution.
//! - [`semantic`]: closed-form semantic template inference and smooth mIoU.
//! - [`remesh`]: deformation of a UV sphere grid onto raw mesh templates.
//! - [`dataset`]: dataset ingestion, quality filters, synthetic benchmarks.
//! - [`eval`]: pose-error metrics and reports.

pub mod dataset;
pub mod dual;
pub mod error;
pub mod eval;
pub mod geom;
pub mod optim;
pub mod pipeline;
pub mod remesh;
pub mod render;
pub mod semantic;

pub use error::{Error, Result};
pub use geom::{CameraPose, Mesh, UnitQuaternion, Vec3};
pub use render::{RenderConfig, SemanticImage, SilhouetteImage};
