//! Camera hypothesis initialization.

use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::geom::{look_at_quaternion, project, CameraPose, Mesh, UnitQuaternion};
use crate::optim::FullMatrixAdam;
use crate::render::SilhouetteImage;
use serde::{Deserialize, Serialize};

/// One candidate camera, optimized independently against the target.
#[derive(Debug, Clone)]
pub struct CameraHypothesis {
    pub pose: CameraPose,
    pub template_id: usize,
    pub adam: FullMatrixAdam,
    pub iou: f64,
    pub miou: f64,
    /// Set when rendering failed during optimization; scored as iou = 0.
    pub failed: bool,
}

/// All hypotheses for one image.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub image_id: String,
    pub hypotheses: Vec<CameraHypothesis>,
}

/// Serializable snapshot of an optimized hypothesis, persisted between the
/// estimate and resolve stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub template_id: usize,
    pub q: [f64; 4],
    pub s: f64,
    pub t: [f64; 2],
    pub z0: f64,
    pub iou: f64,
}

impl HypothesisRecord {
    pub fn pose(&self) -> CameraPose {
        CameraPose::new(UnitQuaternion::from_array(self.q), self.s, self.t, self.z0)
    }
}

/// Initializes `n_azimuth * n_elevation` rotations per template by uniform
/// quantization, with scale and translation seeded from the target mask.
///
/// Scale starts at 0.9 times the ratio between the mask extent and the
/// projected template extent, translation at the mask centroid, z0 at zero.
pub fn init_hypotheses(
    image_id: &str,
    templates: &[Mesh],
    target: &SilhouetteImage,
    cfg: &PipelineConfig,
) -> Result<HypothesisSet> {
    assert!(!templates.is_empty(), "at least one template required");
    let bbox = target.foreground_bbox().ok_or(Error::EmptySilhouette)?;
    let (cx, cy) = target.foreground_centroid().ok_or(Error::EmptySilhouette)?;
    let (w, h) = (target.width as f64, target.height as f64);
    let mask_extent = {
        let bw = (bbox.2 - bbox.0 + 1) as f64 / w * 2.0;
        let bh = (bbox.3 - bbox.1 + 1) as f64 / h * 2.0;
        bw.max(bh)
    };
    let t_init = [cx / w * 2.0 - 1.0, cy / h * 2.0 - 1.0];

    let mut hypotheses = Vec::with_capacity(cfg.n_azimuth * cfg.n_elevation * templates.len());
    for (template_id, mesh) in templates.iter().enumerate() {
        if mesh.vertices.is_empty() {
            return Err(Error::EmptyMesh(format!("template {template_id}")));
        }
        for ei in 0..cfg.n_elevation {
            let elevation = if cfg.n_elevation == 1 {
                0.0
            } else {
                -cfg.elevation_range_deg
                    + 2.0 * cfg.elevation_range_deg * ei as f64 / (cfg.n_elevation - 1) as f64
            };
            for ai in 0..cfg.n_azimuth {
                let azimuth = 360.0 * ai as f64 / cfg.n_azimuth as f64;
                let q = look_at_quaternion(azimuth.to_radians(), elevation.to_radians());
                let pose1 = CameraPose::new(q, 1.0, [0.0, 0.0], 0.0);
                let projected = project(&pose1, &mesh.vertices)?;
                let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
                let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
                for (p, _) in &projected {
                    lo_x = lo_x.min(p[0]);
                    hi_x = hi_x.max(p[0]);
                    lo_y = lo_y.min(p[1]);
                    hi_y = hi_y.max(p[1]);
                }
                let proj_extent = (hi_x - lo_x).max(hi_y - lo_y);
                if proj_extent < 1e-9 {
                    return Err(Error::EmptyMesh(format!(
                        "template {template_id} projects to a point"
                    )));
                }
                let s = 0.9 * mask_extent / proj_extent;
                hypotheses.push(CameraHypothesis {
                    pose: CameraPose::new(q, s, t_init, 0.0),
                    template_id,
                    adam: FullMatrixAdam::new(8, cfg.lr_initial),
                    iou: 0.0,
                    miou: 0.0,
                    failed: false,
                });
            }
        }
    }
    Ok(HypothesisSet { image_id: image_id.to_string(), hypotheses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::remesh::SphereGrid;

    fn target_square() -> SilhouetteImage {
        let mut img = SilhouetteImage::zeros(64, 64);
        for row in 20..44 {
            for col in 24..40 {
                img.set(col, row, 1.0);
            }
        }
        img
    }

    #[test]
    fn one_template_yields_40_hypotheses() {
        let cfg = PipelineConfig::default();
        let mesh = SphereGrid::unit_sphere(8, 8, Vec3::ZERO, 1.0).to_mesh();
        let hs = init_hypotheses("i", &[mesh], &target_square(), &cfg).unwrap();
        assert_eq!(hs.hypotheses.len(), 40);
    }

    #[test]
    fn three_templates_yield_120_hypotheses() {
        let cfg = PipelineConfig::default();
        let mesh = SphereGrid::unit_sphere(8, 8, Vec3::ZERO, 1.0).to_mesh();
        let hs =
            init_hypotheses("i", &[mesh.clone(), mesh.clone(), mesh], &target_square(), &cfg).unwrap();
        assert_eq!(hs.hypotheses.len(), 120);
    }

    #[test]
    fn angular_grid_matches_quantization() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.n_azimuth, 8);
        assert_eq!(cfg.n_elevation, 5);
        // Azimuth spacing 45 degrees: neighboring azimuth hypotheses differ
        // by a 45-degree rotation.
        let mesh = SphereGrid::unit_sphere(8, 8, Vec3::ZERO, 1.0).to_mesh();
        let hs = init_hypotheses("i", &[mesh], &target_square(), &cfg).unwrap();
        let q0 = hs.hypotheses[0].pose.q;
        let q1 = hs.hypotheses[1].pose.q;
        let expected = 1.0 - (45.0f64 / 2.0).to_radians().cos().powi(2);
        let gd = crate::geom::geodesic_distance(q0, q1);
        assert!((gd - expected).abs() < 1e-9, "gd {gd} vs {expected}");
    }

    #[test]
    fn empty_target_is_rejected() {
        let cfg = PipelineConfig::default();
        let mesh = SphereGrid::unit_sphere(8, 8, Vec3::ZERO, 1.0).to_mesh();
        let err = init_hypotheses("i", &[mesh], &SilhouetteImage::zeros(64, 64), &cfg);
        assert!(matches!(err, Err(Error::EmptySilhouette)));
    }

    #[test]
    fn scale_and_translation_frame_the_mask() {
        let cfg = PipelineConfig::default();
        let mesh = SphereGrid::unit_sphere(8, 8, Vec3::ZERO, 1.0).to_mesh();
        let hs = init_hypotheses("i", &[mesh], &target_square(), &cfg).unwrap();
        for hyp in &hs.hypotheses {
            // Mask is 16x24 px in a 64 px frame: extent 24/64*2 = 0.75,
            // sphere projects to extent 2.0, so s = 0.9 * 0.375.
            assert!((hyp.pose.s - 0.9 * 0.375).abs() < 0.02, "s = {}", hyp.pose.s);
            assert!((hyp.pose.t[0] - 0.0).abs() < 0.05);
            assert_eq!(hyp.pose.z0, 0.0);
        }
    }
}
