//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the silfit toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A projected vertex crossed the perspective pole (1 + z0 * depth <= 0).
    #[error("perspective pole crossing: 1 + z0*depth = {denom} at vertex {vertex}")]
    PoleCrossing { vertex: usize, denom: f64 },

    /// Two images that must share a shape do not.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    /// A gradient contained NaN or infinity.
    #[error("non-finite gradient")]
    NonFiniteGradient,

    /// A silhouette target has no foreground pixels.
    #[error("empty silhouette: target mask has no foreground")]
    EmptySilhouette,

    /// A mesh has no vertices or no faces where one is required.
    #[error("empty mesh: {0}")]
    EmptyMesh(String),

    /// Semantic template inference received no qualifying images.
    #[error("empty selection: no images qualify for template inference")]
    EmptySelection,

    /// An image record has no semantic map attached.
    #[error("missing semantics for image {0}")]
    MissingSemantics(String),

    /// A pose estimate has no matching reference pose.
    #[error("missing reference pose for image {0}")]
    MissingReference(String),

    /// A template could not be rendered from any viewpoint.
    #[error("non-renderable template: {0}")]
    NonRenderableTemplate(String),

    /// An expected file is absent.
    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    /// A manifest or sidecar file failed to parse.
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    /// A configuration value is out of its allowed range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
