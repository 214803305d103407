//! Differentiable silhouette rendering and vertex-color rendering.

mod image;
mod metrics;
mod soft;
mod visibility;

pub use image::{SemanticImage, SilhouetteImage};
pub use metrics::{iou, silhouette_mse};
pub use soft::{
    render_silhouette, render_silhouette_with_grad, silhouette_fit_grad, silhouette_vertex_grad,
    CameraTangents, FitEval,
};
pub use visibility::{rasterize_visibility, render_vertex_colors, splat_semantics, VisibilityMap};

/// Rasterization settings. Output images are square at `resolution` pixels;
/// `sigma` is the soft-edge width in pixels. The background is zero.
#[derive(Debug, Clone, Copy)]
pub struct RenderConfig {
    pub resolution: usize,
    pub sigma: f64,
}

impl RenderConfig {
    pub fn new(resolution: usize) -> Self {
        RenderConfig { resolution, sigma: 1.0 }
    }
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig::new(256)
    }
}
