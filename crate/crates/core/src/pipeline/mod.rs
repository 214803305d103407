//! The pose-estimation pipeline: hypothesis initialization, silhouette
//! optimization, scoring and ambiguity detection, and semantic resolution.

mod estimate;
mod hypotheses;
mod resolve;
mod runner;
mod scoring;
mod silhouette;

pub use estimate::{load_poses, write_poses, Phase, PoseEstimate};
pub use hypotheses::{init_hypotheses, CameraHypothesis, HypothesisRecord, HypothesisSet};
pub use resolve::{resolve_dataset, ResolutionOutcome, ResolveImage};
pub use runner::{estimate_image, run_pipeline, PipelineReport};
pub use scoring::{
    agreement_score, ambiguity_filter, confidence_weights, score_hypotheses, ScoreReport,
    DEFAULT_AGREEMENT_THRESHOLD, DEFAULT_TAU,
};
pub use silhouette::optimize_silhouette;

/// One coarse-to-fine stage of the optimization schedule.
#[derive(Debug, Clone, Copy)]
pub struct Stage {
    pub resolution: usize,
    /// 1-based index of the first iteration in this stage.
    pub first_iter: usize,
    pub iterations: usize,
}

/// Pipeline settings. The defaults are the reference hyperparameters:
/// 8 x 5 = 40 hypotheses per template, 100 iterations with the learning rate
/// dropping from 0.1 to 0.01 after iteration 80, renders at 128/192/256 with
/// stage boundaries after iterations 30 and 60, softmax temperature 0.01,
/// agreement threshold 0.3, top-100 template selection, smoothing 1e-3.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub n_azimuth: usize,
    pub n_elevation: usize,
    /// Elevation levels span `[-range, +range]` degrees.
    pub elevation_range_deg: f64,
    pub lr_initial: f64,
    pub lr_after_drop: f64,
    /// Last iteration (1-based) that still uses `lr_initial`.
    pub lr_drop_after_iter: usize,
    /// Render resolution per stage.
    pub resolutions: Vec<usize>,
    /// Iterations per stage; same length as `resolutions`.
    pub stage_iterations: Vec<usize>,
    pub sigma: f64,
    pub tau: f64,
    pub agreement_threshold: f64,
    /// Images per template used for semantic template inference.
    pub n_top: usize,
    /// Additive smoothing of the semantic template.
    pub eps_smooth: f64,
    /// Rotation-distance radius around the left/right profiles for template
    /// selection (strict).
    pub profile_gd_max: f64,
    /// Fraction of images discarded as worst-mIoU during resolution.
    pub discard_fraction: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_azimuth: 8,
            n_elevation: 5,
            elevation_range_deg: 60.0,
            lr_initial: 0.1,
            lr_after_drop: 0.01,
            lr_drop_after_iter: 80,
            resolutions: vec![128, 192, 256],
            stage_iterations: vec![30, 30, 40],
            sigma: 1.0,
            tau: scoring::DEFAULT_TAU,
            agreement_threshold: scoring::DEFAULT_AGREEMENT_THRESHOLD,
            n_top: 100,
            eps_smooth: 1e-3,
            profile_gd_max: 0.5,
            discard_fraction: 0.1,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn stages(&self) -> Vec<Stage> {
        assert_eq!(
            self.resolutions.len(),
            self.stage_iterations.len(),
            "resolution schedule and stage iterations must align"
        );
        let mut stages = Vec::with_capacity(self.resolutions.len());
        let mut first = 1;
        for (&resolution, &iterations) in self.resolutions.iter().zip(&self.stage_iterations) {
            stages.push(Stage { resolution, first_iter: first, iterations });
            first += iterations;
        }
        stages
    }

    pub fn total_iterations(&self) -> usize {
        self.stage_iterations.iter().sum()
    }

    /// Final (highest) render resolution of the schedule.
    pub fn final_resolution(&self) -> usize {
        *self.resolutions.last().expect("schedule is never empty")
    }
}
