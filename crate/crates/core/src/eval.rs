//! Pose-estimation metrics: rotation geodesic distance, recall, and the
//! error-distribution report.

use crate::error::{Error, Result};
use crate::geom::geodesic_distance;
use crate::pipeline::PoseEstimate;
use crate::render::SilhouetteImage;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

pub const HISTOGRAM_BINS: usize = 20;

/// Summary of a pose-estimation run against reference poses.
///
/// `mean_gd_accepted` averages only images that passed ambiguity detection
/// and is `None` when nothing was accepted (never reported as zero).
/// `gd_all` averages every image regardless of acceptance (the 100%-recall
/// figure). The histogram partitions [0, 1] into equal bins over all
/// evaluated images.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub accepted: usize,
    pub recall: f64,
    pub mean_gd_accepted: Option<f64>,
    pub gd_all: f64,
    pub histogram: Vec<usize>,
}

/// Evaluates estimates against reference poses matched by image id.
pub fn evaluate(estimates: &[PoseEstimate], reference: &[PoseEstimate]) -> Result<EvalReport> {
    let by_id: HashMap<&str, &PoseEstimate> =
        reference.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let mut histogram = vec![0usize; HISTOGRAM_BINS];
    let mut sum_all = 0.0;
    let mut sum_accepted = 0.0;
    let mut n_accepted = 0usize;
    for est in estimates {
        let reference = by_id
            .get(est.image_id.as_str())
            .ok_or_else(|| Error::MissingReference(est.image_id.clone()))?;
        let gd = geodesic_distance(est.quat(), reference.quat());
        sum_all += gd;
        let bin = ((gd * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        histogram[bin] += 1;
        if est.accepted {
            sum_accepted += gd;
            n_accepted += 1;
        }
    }
    let total = estimates.len();
    Ok(EvalReport {
        total,
        accepted: n_accepted,
        recall: if total == 0 { 0.0 } else { n_accepted as f64 / total as f64 },
        mean_gd_accepted: if n_accepted == 0 { None } else { Some(sum_accepted / n_accepted as f64) },
        gd_all: if total == 0 { 0.0 } else { sum_all / total as f64 },
        histogram,
    })
}

impl EvalReport {
    /// JSON form; `mean_gd_accepted` serializes as `null` when undefined.
    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<EvalReport> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Histogram as CSV with one row per bin.
    pub fn save_histogram_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (i, count) in self.histogram.iter().enumerate() {
            let lo = i as f64 / HISTOGRAM_BINS as f64;
            let hi = (i + 1) as f64 / HISTOGRAM_BINS as f64;
            writeln!(out, "{lo:.2},{hi:.2},{count}")?;
        }
        Ok(())
    }

    /// Renders the histogram as a grayscale bar chart.
    pub fn histogram_image(&self, width: usize, height: usize) -> SilhouetteImage {
        let mut img = SilhouetteImage::zeros(width, height);
        let max = self.histogram.iter().cloned().max().unwrap_or(0).max(1) as f64;
        let bar_w = width / HISTOGRAM_BINS;
        for (i, &count) in self.histogram.iter().enumerate() {
            let bar_h = ((count as f64 / max) * (height as f64 - 2.0)).round() as usize;
            for row in 0..bar_h {
                for col in 0..bar_w.saturating_sub(1) {
                    let x = i * bar_w + col;
                    let y = height - 1 - row;
                    if x < width {
                        img.set(x, y, 1.0);
                    }
                }
            }
        }
        img
    }

    /// One-line human-readable summary.
    pub fn summary(&self) -> String {
        let gd = match self.mean_gd_accepted {
            Some(v) => format!("{v:.4}"),
            None => "n/a".to_string(),
        };
        format!(
            "images {}  accepted {}  recall {:.3}  GD(accepted) {}  GD(1) {:.4}",
            self.total, self.accepted, self.recall, gd, self.gd_all
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::UnitQuaternion;
    use crate::pipeline::Phase;

    fn est(id: &str, q: UnitQuaternion, accepted: bool) -> PoseEstimate {
        PoseEstimate {
            image_id: id.into(),
            template_id: 0,
            q: q.as_array(),
            s: 0.6,
            t: [0.0, 0.0],
            z0: 0.0,
            iou: 0.9,
            miou: 0.0,
            v_agr: 0.0,
            accepted,
            phase: Phase::Silhouette,
        }
    }

    #[test]
    fn perfect_estimates_score_zero() {
        let q = UnitQuaternion::from_axis_angle(crate::geom::Vec3::new(0.0, 1.0, 0.2), 0.7);
        let estimates = vec![est("a", q, true), est("b", q, false)];
        let reference = vec![est("a", q, true), est("b", q, true)];
        let r = evaluate(&estimates, &reference).unwrap();
        assert_eq!(r.total, 2);
        assert_eq!(r.accepted, 1);
        assert_eq!(r.recall, 0.5);
        assert!(r.mean_gd_accepted.unwrap() < 1e-12);
        assert!(r.gd_all < 1e-12);
        assert_eq!(r.histogram[0], 2);
        assert_eq!(r.histogram.iter().sum::<usize>(), 2);
    }

    #[test]
    fn all_rejected_reports_absent_mean() {
        let q = UnitQuaternion::IDENTITY;
        let estimates = vec![est("a", q, false)];
        let reference = vec![est("a", q, true)];
        let r = evaluate(&estimates, &reference).unwrap();
        assert_eq!(r.recall, 0.0);
        assert!(r.mean_gd_accepted.is_none());
        // Serialized as null, not zero.
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"mean_gd_accepted\":null"));
    }

    #[test]
    fn missing_reference_is_an_error() {
        let estimates = vec![est("a", UnitQuaternion::IDENTITY, true)];
        let err = evaluate(&estimates, &[]);
        assert!(matches!(err, Err(Error::MissingReference(_))));
    }

    #[test]
    fn report_is_order_invariant_and_bins_partition() {
        let qs: Vec<UnitQuaternion> = (0..10)
            .map(|i| {
                UnitQuaternion::from_axis_angle(
                    crate::geom::Vec3::new(0.0, 0.0, 1.0),
                    i as f64 * 0.3,
                )
            })
            .collect();
        let estimates: Vec<PoseEstimate> =
            qs.iter().enumerate().map(|(i, q)| est(&format!("i{i}"), *q, true)).collect();
        let reference: Vec<PoseEstimate> =
            (0..10).map(|i| est(&format!("i{i}"), UnitQuaternion::IDENTITY, true)).collect();
        let a = evaluate(&estimates, &reference).unwrap();
        let mut shuffled = estimates.clone();
        shuffled.reverse();
        let b = evaluate(&shuffled, &reference).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert!((a.gd_all - b.gd_all).abs() < 1e-15);
        assert_eq!(a.histogram.iter().sum::<usize>(), 10);
    }

    #[test]
    fn report_round_trips_and_exports() {
        let dir = tempfile::tempdir().unwrap();
        let r = EvalReport {
            total: 4,
            accepted: 3,
            recall: 0.75,
            mean_gd_accepted: Some(0.0125),
            gd_all: 0.26,
            histogram: {
                let mut h = vec![0; HISTOGRAM_BINS];
                h[0] = 3;
                h[19] = 1;
                h
            },
        };
        let json_path = dir.path().join("report.json");
        r.save_json(&json_path).unwrap();
        let back = EvalReport::load_json(&json_path).unwrap();
        assert_eq!(back.total, 4);
        assert_eq!(back.mean_gd_accepted, Some(0.0125));

        let csv_path = dir.path().join("hist.csv");
        r.save_histogram_csv(&csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), HISTOGRAM_BINS + 1);
        assert!(text.starts_with("bin_lo,bin_hi,count"));

        let img = r.histogram_image(200, 100);
        assert!(img.mean() > 0.0);
    }
}
