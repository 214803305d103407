//! Template remeshing: deforming a UV sphere grid onto raw mesh templates.

mod grid;

pub use grid::{GridSidecar, SphereGrid};
