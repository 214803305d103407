//! Ambiguity resolution with semantic templates.
//!
//! Re-scores every optimized hypothesis by the smooth mIoU between the
//! rendered semantic template and the image's 2D semantic map, recomputes
//! confidence and agreement on that metric, and picks the best hypothesis
//! per image. A silhouette-ambiguous front/back pair renders near-identical
//! masks but opposite semantic layouts, so the mIoU separates the clusters
//! and the agreement score drops for the correct one.

use super::estimate::{Phase, PoseEstimate};
use super::hypotheses::HypothesisRecord;
use super::scoring::score_hypotheses;
use super::PipelineConfig;
use crate::error::Result;
use crate::geom::Mesh;
use crate::render::{render_vertex_colors, SemanticImage};
use crate::semantic::{smooth_miou, SemanticTemplate};
use rayon::prelude::*;

/// Per-image input to the resolution phase.
pub struct ResolveImage<'a> {
    pub image_id: String,
    pub hypotheses: Vec<HypothesisRecord>,
    /// Phase-1 output, used as fallback when the image has no semantics.
    pub silhouette_estimate: PoseEstimate,
    pub semantics: Option<&'a SemanticImage>,
}

/// Outcome of resolving one dataset.
#[derive(Debug, Clone)]
pub struct ResolutionOutcome {
    pub estimates: Vec<PoseEstimate>,
    /// Ids that fell below the dataset-level mIoU cut.
    pub discarded_low_miou: Vec<String>,
}

struct ResolvedImage {
    index: usize,
    best_hypothesis: usize,
    miou: f64,
    v_agr: f64,
}

/// Resolves all images. Images without a semantic map keep their
/// silhouette-phase estimate; the rest are re-scored by mIoU, the worst
/// `discard_fraction` of resolvable images (by best mIoU) is rejected, and
/// the remainder is accepted when the recomputed agreement score stays at or
/// below the threshold.
pub fn resolve_dataset(
    images: &[ResolveImage<'_>],
    templates: &[Mesh],
    sem_templates: &[SemanticTemplate],
    cfg: &PipelineConfig,
) -> Result<ResolutionOutcome> {
    // Score resolvable images in parallel; order is restored by index.
    let resolved: Vec<Option<ResolvedImage>> = images
        .par_iter()
        .enumerate()
        .map(|(index, img)| {
            let sem = img.semantics?;
            Some(score_image(index, img, sem, templates, sem_templates, cfg))
        })
        .collect::<Vec<Option<Result<ResolvedImage>>>>()
        .into_iter()
        .map(Option::transpose)
        .collect::<Result<Vec<Option<ResolvedImage>>>>()?;

    // Dataset-level cut: discard the k lowest best-mIoU images among the
    // resolvable ones, k = floor(n * discard_fraction).
    let mut by_miou: Vec<(f64, usize)> = resolved
        .iter()
        .flatten()
        .map(|r| (r.miou, r.index))
        .collect();
    by_miou.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let k = (by_miou.len() as f64 * cfg.discard_fraction).floor() as usize;
    let discarded: std::collections::HashSet<usize> =
        by_miou.iter().take(k).map(|&(_, i)| i).collect();

    let mut estimates = Vec::with_capacity(images.len());
    let mut discarded_ids = Vec::new();
    for (index, img) in images.iter().enumerate() {
        match &resolved[index] {
            None => {
                // No semantics: keep the silhouette-phase estimate.
                let mut e = img.silhouette_estimate.clone();
                e.phase = Phase::Silhouette;
                estimates.push(e);
            }
            Some(r) => {
                let hyp = &img.hypotheses[r.best_hypothesis];
                let cut = discarded.contains(&index);
                if cut {
                    discarded_ids.push(img.image_id.clone());
                }
                let accepted = !cut && r.v_agr <= cfg.agreement_threshold;
                estimates.push(PoseEstimate {
                    image_id: img.image_id.clone(),
                    template_id: hyp.template_id,
                    q: hyp.q,
                    s: hyp.s,
                    t: hyp.t,
                    z0: hyp.z0,
                    iou: hyp.iou,
                    miou: r.miou,
                    v_agr: r.v_agr,
                    accepted,
                    phase: Phase::Semantics,
                });
            }
        }
    }
    Ok(ResolutionOutcome { estimates, discarded_low_miou: discarded_ids })
}

fn score_image(
    index: usize,
    img: &ResolveImage<'_>,
    sem: &SemanticImage,
    templates: &[Mesh],
    sem_templates: &[SemanticTemplate],
    cfg: &PipelineConfig,
) -> Result<ResolvedImage> {
    let mut mious = Vec::with_capacity(img.hypotheses.len());
    for hyp in &img.hypotheses {
        let tpl = &sem_templates[hyp.template_id];
        let mesh = &templates[hyp.template_id];
        let miou = match render_vertex_colors(mesh, &tpl.colors, &hyp.pose(), sem.width) {
            Ok(rendered) => smooth_miou(&rendered, sem)?,
            Err(_) => 0.0,
        };
        mious.push(miou);
    }
    let quats: Vec<_> = img.hypotheses.iter().map(|h| h.pose().q).collect();
    let report = score_hypotheses(&mious, &quats, cfg.tau);
    // Best by mIoU; ties fall back to the silhouette ranking, then index.
    let mut best = 0;
    for i in 1..img.hypotheses.len() {
        let better = mious[i] > mious[best]
            || (mious[i] == mious[best] && img.hypotheses[i].iou > img.hypotheses[best].iou);
        if better {
            best = i;
        }
    }
    Ok(ResolvedImage { index, best_hypothesis: best, miou: mious[best], v_agr: report.v_agr })
}
