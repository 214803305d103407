//! Single-pass pipeline execution: silhouette optimization, scoring,
//! semantic template inference, and ambiguity resolution, in that order,
//! exactly once. Repeating the inference/resolution cycle brings no
//! measurable improvement, so it is not offered.

use super::estimate::{Phase, PoseEstimate};
use super::hypotheses::{init_hypotheses, HypothesisRecord, HypothesisSet};
use super::resolve::{resolve_dataset, ResolveImage};
use super::scoring::{ambiguity_filter, score_hypotheses};
use super::silhouette::optimize_silhouette;
use super::PipelineConfig;
use crate::dataset::DatasetManifest;
use crate::error::Result;
use crate::geom::Mesh;
use crate::semantic::{infer_template, select_images, SemanticTemplate};
use rayon::prelude::*;

/// Everything the pipeline produces for one dataset.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    /// Final per-image estimates (semantics phase where available).
    pub estimates: Vec<PoseEstimate>,
    /// Phase-1 estimates, kept for comparison and for template selection.
    pub silhouette_estimates: Vec<PoseEstimate>,
    /// Optimized hypotheses per image, aligned with `estimates`.
    pub hypotheses: Vec<(String, Vec<HypothesisRecord>)>,
    pub semantic_templates: Vec<SemanticTemplate>,
    /// Images that could not be processed, with the reason.
    pub failures: Vec<(String, String)>,
}

/// Optimizes one image and reduces it to a phase-1 estimate plus the full
/// set of optimized hypotheses.
pub fn estimate_image(
    image_id: &str,
    mask: &crate::render::SilhouetteImage,
    templates: &[Mesh],
    multi_template: bool,
    cfg: &PipelineConfig,
) -> Result<(PoseEstimate, Vec<HypothesisRecord>)> {
    let mut hs: HypothesisSet = init_hypotheses(image_id, templates, mask, cfg)?;
    optimize_silhouette(&mut hs, mask, templates, multi_template, cfg)?;
    let records: Vec<HypothesisRecord> = hs
        .hypotheses
        .iter()
        .map(|h| HypothesisRecord {
            template_id: h.template_id,
            q: h.pose.q.as_array(),
            s: h.pose.s,
            t: h.pose.t,
            z0: h.pose.z0,
            iou: h.iou,
        })
        .collect();

    let ious: Vec<f64> = records.iter().map(|r| r.iou).collect();
    let quats: Vec<_> = records.iter().map(|r| r.pose().q).collect();
    let report = score_hypotheses(&ious, &quats, cfg.tau);
    let mut best = 0;
    for i in 1..records.len() {
        if records[i].iou > records[best].iou {
            best = i;
        }
    }
    let accepted = ambiguity_filter(report.v_agr, cfg.agreement_threshold);
    let b = &records[best];
    let estimate = PoseEstimate {
        image_id: image_id.to_string(),
        template_id: b.template_id,
        q: b.q,
        s: b.s,
        t: b.t,
        z0: b.z0,
        iou: b.iou,
        miou: 0.0,
        v_agr: report.v_agr,
        accepted,
        phase: Phase::Silhouette,
    };
    Ok((estimate, records))
}

/// Runs the full pipeline over a dataset.
///
/// Per-image failures (for example an empty mask) are collected into the
/// report instead of aborting the batch.
pub fn run_pipeline(
    dataset: &DatasetManifest,
    templates: &[Mesh],
    multi_template: bool,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    // Phase 1: per-image silhouette optimization, parallel over images.
    let results: Vec<(String, Result<(PoseEstimate, Vec<HypothesisRecord>)>)> = dataset
        .records
        .par_iter()
        .map(|rec| {
            let out = estimate_image(&rec.id, &rec.mask, templates, multi_template, cfg);
            (rec.id.clone(), out)
        })
        .collect();

    let mut silhouette_estimates = Vec::new();
    let mut hypotheses = Vec::new();
    let mut failures = Vec::new();
    let mut ok_indices = Vec::new();
    for (idx, (id, res)) in results.into_iter().enumerate() {
        match res {
            Ok((est, recs)) => {
                silhouette_estimates.push(est);
                hypotheses.push((id, recs));
                ok_indices.push(idx);
            }
            Err(e) => failures.push((id, e.to_string())),
        }
    }

    // Phase 2: infer a semantic template per mesh template, when the
    // dataset carries semantics and images qualify.
    let semantic_templates = if dataset.classes > 0 {
        infer_templates(dataset, templates, &silhouette_estimates, &ok_indices, cfg)?
    } else {
        Vec::new()
    };

    // Phase 3: resolution (or passthrough when no templates were inferred).
    let estimates = if semantic_templates.len() == templates.len() {
        let images: Vec<ResolveImage<'_>> = silhouette_estimates
            .iter()
            .zip(&hypotheses)
            .zip(&ok_indices)
            .map(|((est, (_, recs)), &idx)| ResolveImage {
                image_id: est.image_id.clone(),
                hypotheses: recs.clone(),
                silhouette_estimate: est.clone(),
                semantics: dataset.records[idx].semantics.as_ref(),
            })
            .collect();
        resolve_dataset(&images, templates, &semantic_templates, cfg)?.estimates
    } else {
        silhouette_estimates.clone()
    };

    Ok(PipelineReport {
        estimates,
        silhouette_estimates,
        hypotheses,
        semantic_templates,
        failures,
    })
}

/// Template selection and closed-form inference, one template at a time.
/// Returns an empty list when no template gets a non-empty selection.
fn infer_templates(
    dataset: &DatasetManifest,
    templates: &[Mesh],
    estimates: &[PoseEstimate],
    ok_indices: &[usize],
    cfg: &PipelineConfig,
) -> Result<Vec<SemanticTemplate>> {
    let selections = select_images(estimates, templates.len(), cfg.n_top, cfg.profile_gd_max);
    let by_id: std::collections::HashMap<&str, usize> = estimates
        .iter()
        .enumerate()
        .map(|(i, e)| (e.image_id.as_str(), i))
        .collect();
    let mut out = Vec::new();
    for (template_id, selection) in selections.iter().enumerate() {
        let mut pairs = Vec::new();
        for id in &selection.image_ids {
            let est_idx = by_id[id.as_str()];
            let rec = &dataset.records[ok_indices[est_idx]];
            if let Some(sem) = &rec.semantics {
                pairs.push((estimates[est_idx].pose(), sem));
            }
        }
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        out.push(infer_template(
            &templates[template_id],
            template_id,
            &pairs,
            dataset.classes,
            cfg.eps_smooth,
        )?);
    }
    Ok(out)
}
