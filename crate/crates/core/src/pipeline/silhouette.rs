//! Multi-hypothesis silhouette optimization with a coarse-to-fine schedule.

use super::hypotheses::HypothesisSet;
use super::PipelineConfig;
use crate::error::Result;
use crate::geom::{CameraPose, Mesh};
use crate::render::{render_silhouette, silhouette_fit_grad, RenderConfig, SilhouetteImage};

/// Guards against degenerate cameras during optimization. The scale must
/// stay positive; z0 must keep `1 + z0 * depth` positive for unit-sphere
/// templates with a little slack.
const MIN_SCALE: f64 = 0.01;
const MAX_Z0: f64 = 0.45;

/// Optimizes every hypothesis against the target silhouette.
///
/// Each hypothesis runs `cfg.iterations` full-matrix Adam steps on the 8
/// camera parameters with the learning rate dropping at
/// `cfg.lr_drop_after_iter` and the render resolution following
/// `cfg.resolution_schedule`. The quaternion is renormalized onto the unit
/// sphere after every step. With `multi_template`, the worst half of the
/// hypotheses (by IoU) is discarded at each schedule boundary. The final IoU
/// is measured at the last schedule resolution.
pub fn optimize_silhouette(
    hs: &mut HypothesisSet,
    target: &SilhouetteImage,
    templates: &[Mesh],
    multi_template: bool,
    cfg: &PipelineConfig,
) -> Result<()> {
    let stages = cfg.stages();
    // Pre-resample the target once per resolution.
    let targets: Vec<SilhouetteImage> =
        stages.iter().map(|s| target.resample_area(s.resolution, s.resolution)).collect();

    for (stage_idx, stage) in stages.iter().enumerate() {
        let render_cfg = RenderConfig { resolution: stage.resolution, sigma: cfg.sigma };
        let stage_target = &targets[stage_idx];
        for hyp in hs.hypotheses.iter_mut() {
            if hyp.failed {
                continue;
            }
            for it in stage.first_iter..stage.first_iter + stage.iterations {
                hyp.adam.alpha =
                    if it <= cfg.lr_drop_after_iter { cfg.lr_initial } else { cfg.lr_after_drop };
                let fit =
                    match silhouette_fit_grad(&templates[hyp.template_id], &hyp.pose, &render_cfg, stage_target)
                    {
                        Ok(fit) => fit,
                        Err(_) => {
                            hyp.failed = true;
                            hyp.iou = 0.0;
                            break;
                        }
                    };
                hyp.iou = fit.iou;
                let mut params = hyp.pose.to_params();
                if hyp.adam.step(&mut params, &fit.grad).is_err() {
                    hyp.failed = true;
                    hyp.iou = 0.0;
                    break;
                }
                let mut pose = CameraPose::from_params(&params);
                // Reproject the quaternion onto the unit sphere and keep the
                // perspective term in its safe range.
                pose.q = pose.q.renormalize();
                pose.s = pose.s.max(MIN_SCALE);
                pose.z0 = pose.z0.clamp(0.0, MAX_Z0);
                hyp.pose = pose;
            }
        }
        if multi_template && stage_idx + 1 < stages.len() {
            prune_worst_half(hs);
        }
    }

    // Record the final IoU at the last stage resolution.
    let last = stages.last().expect("schedule is never empty");
    let render_cfg = RenderConfig { resolution: last.resolution, sigma: cfg.sigma };
    let final_target = &targets[stages.len() - 1];
    for hyp in hs.hypotheses.iter_mut() {
        if hyp.failed {
            hyp.iou = 0.0;
            continue;
        }
        match render_silhouette(&templates[hyp.template_id], &hyp.pose, &render_cfg) {
            Ok(img) => {
                hyp.iou = crate::render::iou(&img, final_target, 0.5)?;
            }
            Err(_) => {
                hyp.failed = true;
                hyp.iou = 0.0;
            }
        }
    }
    Ok(())
}

/// Keeps the best `floor(n/2)` hypotheses by IoU. Ties keep the earlier
/// hypothesis so reruns are deterministic; the current best always survives.
fn prune_worst_half(hs: &mut HypothesisSet) {
    let n = hs.hypotheses.len();
    let keep = n / 2;
    if keep == 0 || n <= 1 {
        return;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        hs.hypotheses[b]
            .iou
            .partial_cmp(&hs.hypotheses[a].iou)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(keep);
    order.sort_unstable();
    let mut kept = Vec::with_capacity(keep);
    for idx in order {
        kept.push(hs.hypotheses[idx].clone());
    }
    hs.hypotheses = kept;
}
