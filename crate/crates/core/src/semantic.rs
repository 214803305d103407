//! Semantic templates: per-vertex class distributions inferred in closed
//! form from posed 2D semantic maps, and the smooth mIoU metric.
//!
//! Inference splats every selected image's semantic map onto the template
//! vertices (the adjoint of vertex-color rendering), accumulates, and
//! normalizes per vertex with additive smoothing. A vertex that is never
//! rendered accumulates nothing and comes out as the uniform distribution.
//! The whole step is a single pass through the selected images.

use crate::error::{Error, Result};
use crate::geom::{geodesic_distance, look_at_quaternion, CameraPose, Mesh, UnitQuaternion};
use crate::pipeline::{PoseEstimate, DEFAULT_AGREEMENT_THRESHOLD};
use crate::render::{splat_semantics, SemanticImage};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Per-vertex class distributions for one mesh template.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticTemplate {
    pub template_id: usize,
    pub classes: usize,
    /// `colors[k][v]`: probability of class `k` at vertex `v`. Every vertex
    /// column sums to one.
    pub colors: Vec<Vec<f64>>,
    pub eps_smooth: f64,
}

impl SemanticTemplate {
    pub fn num_vertices(&self) -> usize {
        self.colors.first().map_or(0, Vec::len)
    }

    /// Persists as plain text: a header line `template_id K N_v eps`, then
    /// one row of K reals per vertex.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let n_v = self.num_vertices();
        writeln!(out, "{} {} {} {:.8e}", self.template_id, self.classes, n_v, self.eps_smooth)?;
        for v in 0..n_v {
            let row: Vec<String> =
                (0..self.classes).map(|k| format!("{:.8e}", self.colors[k][v])).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SemanticTemplate> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedManifest(format!("{}: empty", path.display())))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::MalformedManifest(format!("{}: bad header", path.display())));
        }
        let parse_err = |what: &str| Error::MalformedManifest(format!("{}: bad {what}", path.display()));
        let template_id: usize = fields[0].parse().map_err(|_| parse_err("template_id"))?;
        let classes: usize = fields[1].parse().map_err(|_| parse_err("K"))?;
        let n_v: usize = fields[2].parse().map_err(|_| parse_err("N_v"))?;
        let eps_smooth: f64 = fields[3].parse().map_err(|_| parse_err("eps"))?;
        let mut colors = vec![vec![0.0; n_v]; classes];
        for v in 0..n_v {
            let line = lines
                .next()
                .ok_or_else(|| Error::MalformedManifest(format!("{}: truncated", path.display())))??;
            let row: Vec<&str> = line.split_whitespace().collect();
            if row.len() != classes {
                return Err(Error::MalformedManifest(format!(
                    "{}: vertex {v} has {} values, expected {classes}",
                    path.display(),
                    row.len()
                )));
            }
            for (k, tok) in row.iter().enumerate() {
                colors[k][v] = tok.parse().map_err(|_| parse_err("value"))?;
            }
        }
        Ok(SemanticTemplate { template_id, classes, colors, eps_smooth })
    }

    /// Exports the template mesh with each vertex colored by its argmax
    /// class, for eyeballing in a mesh viewer.
    pub fn export_colored_obj(&self, mesh: &Mesh, path: &Path) -> Result<()> {
        let palette: [[f64; 3]; 12] = [
            [0.894, 0.102, 0.110],
            [0.216, 0.494, 0.722],
            [0.302, 0.686, 0.290],
            [0.596, 0.306, 0.639],
            [1.000, 0.498, 0.000],
            [1.000, 1.000, 0.200],
            [0.651, 0.337, 0.157],
            [0.969, 0.506, 0.749],
            [0.600, 0.600, 0.600],
            [0.122, 0.471, 0.706],
            [0.682, 0.780, 0.910],
            [0.090, 0.745, 0.812],
        ];
        let n_v = self.num_vertices();
        let mut colors = Vec::with_capacity(n_v);
        for v in 0..n_v {
            let mut best = 0;
            for k in 1..self.classes {
                if self.colors[k][v] > self.colors[best][v] {
                    best = k;
                }
            }
            colors.push(palette[best % palette.len()]);
        }
        mesh.save_obj_colored(path, &colors)
    }
}

/// Images chosen to infer one template's semantics.
#[derive(Debug, Clone)]
pub struct TemplateSelection {
    pub template_id: usize,
    pub image_ids: Vec<String>,
}

/// Picks, per template, the images whose silhouette-phase estimate is
/// unambiguous (strictly below the agreement threshold), whose rotation is
/// strictly within `profile_gd_max` of the canonical left or right profile,
/// ranked by IoU and truncated at `n_top`.
pub fn select_images(
    estimates: &[PoseEstimate],
    n_templates: usize,
    n_top: usize,
    profile_gd_max: f64,
) -> Vec<TemplateSelection> {
    let left = look_at_quaternion(std::f64::consts::FRAC_PI_2, 0.0);
    let right = look_at_quaternion(-std::f64::consts::FRAC_PI_2, 0.0);
    let mut selections: Vec<TemplateSelection> = (0..n_templates)
        .map(|template_id| TemplateSelection { template_id, image_ids: Vec::new() })
        .collect();
    for template_id in 0..n_templates {
        let mut ranked: Vec<(f64, usize)> = estimates
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.template_id == template_id
                    && e.v_agr < DEFAULT_AGREEMENT_THRESHOLD
                    && profile_distance(e.quat(), left, right) < profile_gd_max
            })
            .map(|(i, e)| (e.iou, i))
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        ranked.truncate(n_top);
        selections[template_id].image_ids =
            ranked.iter().map(|&(_, i)| estimates[i].image_id.clone()).collect();
    }
    selections
}

/// Rotation distance to the nearer of the two profile views.
pub fn profile_distance(q: UnitQuaternion, left: UnitQuaternion, right: UnitQuaternion) -> f64 {
    geodesic_distance(q, left).min(geodesic_distance(q, right))
}

/// Infers a semantic template from posed semantic maps in one pass.
///
/// Accumulates `A[k][v] = sum_i splat(sem_i at pose_i)` and normalizes each
/// vertex with additive smoothing:
/// `colors[k][v] = (eps + A[k][v]) / (K eps + sum_j A[j][v])`.
pub fn infer_template(
    mesh: &Mesh,
    template_id: usize,
    selection: &[(CameraPose, &SemanticImage)],
    classes: usize,
    eps_smooth: f64,
) -> Result<SemanticTemplate> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    assert!(classes > 0);
    assert!(eps_smooth > 0.0, "additive smoothing must be positive");
    let n_v = mesh.vertices.len();
    let mut acc = vec![vec![0.0f64; n_v]; classes];
    for (pose, sem) in selection {
        if sem.classes != classes {
            return Err(Error::ShapeMismatch {
                expected: format!("{classes} classes"),
                got: format!("{}", sem.classes),
            });
        }
        let splat = splat_semantics(mesh, pose, sem)?;
        for k in 0..classes {
            for v in 0..n_v {
                acc[k][v] += splat[k][v];
            }
        }
    }
    let mut colors = vec![vec![0.0f64; n_v]; classes];
    for v in 0..n_v {
        let total: f64 = (0..classes).map(|k| acc[k][v]).sum();
        let denom = classes as f64 * eps_smooth + total;
        for k in 0..classes {
            colors[k][v] = (eps_smooth + acc[k][v]) / denom;
        }
    }
    Ok(SemanticTemplate { template_id, classes, colors, eps_smooth })
}

/// Smooth mIoU (weighted Jaccard similarity) between two non-negative
/// class maps: mean over classes of `|min|_1 / |max|_1`, with an all-empty
/// class counting as perfect agreement.
pub fn smooth_miou(rendered: &SemanticImage, target: &SemanticImage) -> Result<f64> {
    if !rendered.same_shape(target) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}x{}", rendered.classes, rendered.height, rendered.width),
            got: format!("{}x{}x{}", target.classes, target.height, target.width),
        });
    }
    let n = rendered.width * rendered.height;
    let mut total = 0.0;
    for k in 0..rendered.classes {
        let a = &rendered.data[k * n..(k + 1) * n];
        let b = &target.data[k * n..(k + 1) * n];
        let mut inter = 0.0;
        let mut union = 0.0;
        for i in 0..n {
            inter += a[i].min(b[i]);
            union += a[i].max(b[i]);
        }
        total += if union == 0.0 { 1.0 } else { inter / union };
    }
    Ok(total / rendered.classes as f64)
}
