//! Hard (z-buffered) rasterization with barycentric weights.
//!
//! Vertex-color rendering is a linear map of the colors at fixed visibility,
//! and the semantic splat is its exact transpose: both are driven by the same
//! [`VisibilityMap`], so the adjoint identity
//! `<render(C), S> = <C, splat(S)>` holds to rounding error.

use super::image::{SemanticImage, SilhouetteImage};
use crate::error::{Error, Result};
use crate::geom::{project, CameraPose, Mesh};

/// Per-pixel visible face and barycentric weights. `face[i] == usize::MAX`
/// marks background.
#[derive(Debug, Clone)]
pub struct VisibilityMap {
    pub width: usize,
    pub height: usize,
    pub face: Vec<usize>,
    pub bary: Vec<[f64; 3]>,
}

pub const NO_FACE: usize = usize::MAX;

impl VisibilityMap {
    /// Hard coverage mask (1 where a face is visible).
    pub fn coverage(&self) -> SilhouetteImage {
        let data = self.face.iter().map(|&f| if f == NO_FACE { 0.0 } else { 1.0 }).collect();
        SilhouetteImage::from_data(self.width, self.height, data)
    }
}

/// Rasterizes `mesh` under `pose` with a nearest-depth z-buffer.
///
/// Depth is the rotated `v'_z` interpolated with barycentric weights; smaller
/// values are nearer (see [`CameraPose`]). Ties keep the earlier face, so the
/// result is deterministic in face order.
pub fn rasterize_visibility(
    mesh: &Mesh,
    pose: &CameraPose,
    width: usize,
    height: usize,
) -> Result<VisibilityMap> {
    let projected = project(pose, &mesh.vertices)?;
    let half_w = width as f64 * 0.5;
    let half_h = height as f64 * 0.5;
    let pix: Vec<[f64; 2]> = projected
        .iter()
        .map(|(p, _)| [p[0] * half_w + half_w, p[1] * half_h + half_h])
        .collect();
    let depth: Vec<f64> = projected.iter().map(|&(_, z)| z).collect();

    let mut face_buf = vec![NO_FACE; width * height];
    let mut bary_buf = vec![[0.0; 3]; width * height];
    let mut z_buf = vec![f64::INFINITY; width * height];

    for (fi, f) in mesh.faces.iter().enumerate() {
        let a = pix[f[0]];
        let b = pix[f[1]];
        let c = pix[f[2]];
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if area2.abs() < 1e-12 {
            continue;
        }
        let inv_area = 1.0 / area2;
        let min_x = a[0].min(b[0]).min(c[0]);
        let max_x = a[0].max(b[0]).max(c[0]);
        let min_y = a[1].min(b[1]).min(c[1]);
        let max_y = a[1].max(b[1]).max(c[1]);
        let col0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let col1 = (max_x - 0.5).floor().min(width as f64 - 1.0);
        let row0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let row1 = (max_y - 0.5).floor().min(height as f64 - 1.0);
        if col1 < 0.0 || row1 < 0.0 || min_x > width as f64 || min_y > height as f64 {
            continue;
        }
        let (col1, row1) = (col1 as usize, row1 as usize);

        for row in row0..=row1 {
            let py = row as f64 + 0.5;
            for col in col0..=col1 {
                let px = col as f64 + 0.5;
                let wa = ((c[0] - b[0]) * (py - b[1]) - (c[1] - b[1]) * (px - b[0])) * inv_area;
                let wb = ((a[0] - c[0]) * (py - c[1]) - (a[1] - c[1]) * (px - c[0])) * inv_area;
                let wc = 1.0 - wa - wb;
                if wa < 0.0 || wb < 0.0 || wc < 0.0 {
                    continue;
                }
                let z = wa * depth[f[0]] + wb * depth[f[1]] + wc * depth[f[2]];
                let idx = row * width + col;
                if z < z_buf[idx] {
                    z_buf[idx] = z;
                    face_buf[idx] = fi;
                    bary_buf[idx] = [wa, wb, wc];
                }
            }
        }
    }

    Ok(VisibilityMap { width, height, face: face_buf, bary: bary_buf })
}

fn check_colors(mesh: &Mesh, colors: &[Vec<f64>]) -> Result<usize> {
    let k = colors.len();
    for (ki, plane) in colors.iter().enumerate() {
        if plane.len() != mesh.vertices.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} per-vertex values", mesh.vertices.len()),
                got: format!("{} in class {ki}", plane.len()),
            });
        }
    }
    Ok(k)
}

/// Renders per-vertex class distributions: each covered pixel interpolates
/// the visible face's vertex colors with barycentric weights. The output is
/// linear in `colors`; background pixels are zero in every class.
pub fn render_vertex_colors(
    mesh: &Mesh,
    colors: &[Vec<f64>],
    pose: &CameraPose,
    resolution: usize,
) -> Result<SemanticImage> {
    let k = check_colors(mesh, colors)?;
    let vis = rasterize_visibility(mesh, pose, resolution, resolution)?;
    Ok(render_vertex_colors_vis(mesh, colors, &vis, k))
}

/// Same as [`render_vertex_colors`] but reuses a precomputed visibility map.
pub fn render_vertex_colors_vis(
    mesh: &Mesh,
    colors: &[Vec<f64>],
    vis: &VisibilityMap,
    k: usize,
) -> SemanticImage {
    let mut out = SemanticImage::zeros(vis.width, vis.height, k);
    let n = vis.width * vis.height;
    for idx in 0..n {
        let fi = vis.face[idx];
        if fi == NO_FACE {
            continue;
        }
        let f = mesh.faces[fi];
        let w = vis.bary[idx];
        for ki in 0..k {
            let plane = &colors[ki];
            out.data[ki * n + idx] = w[0] * plane[f[0]] + w[1] * plane[f[1]] + w[2] * plane[f[2]];
        }
    }
    out
}

/// Transpose of [`render_vertex_colors`]: scatters a semantic image onto the
/// visible vertices with the same barycentric weights. Returns a `K x N_v`
/// accumulator (`acc[k][v]`), non-negative for non-negative input.
pub fn splat_semantics(
    mesh: &Mesh,
    pose: &CameraPose,
    sem: &SemanticImage,
) -> Result<Vec<Vec<f64>>> {
    let vis = rasterize_visibility(mesh, pose, sem.width, sem.height)?;
    Ok(splat_semantics_vis(mesh, &vis, sem))
}

/// Same as [`splat_semantics`] but reuses a precomputed visibility map.
pub fn splat_semantics_vis(mesh: &Mesh, vis: &VisibilityMap, sem: &SemanticImage) -> Vec<Vec<f64>> {
    let k = sem.classes;
    let n = vis.width * vis.height;
    let mut acc = vec![vec![0.0; mesh.vertices.len()]; k];
    for idx in 0..n {
        let fi = vis.face[idx];
        if fi == NO_FACE {
            continue;
        }
        let f = mesh.faces[fi];
        let w = vis.bary[idx];
        for ki in 0..k {
            let v = sem.data[ki * n + idx];
            if v != 0.0 {
                acc[ki][f[0]] += w[0] * v;
                acc[ki][f[1]] += w[1] * v;
                acc[ki][f[2]] += w[2] * v;
            }
        }
    }
    acc
}
