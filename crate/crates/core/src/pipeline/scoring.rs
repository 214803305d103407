//! Hypothesis scoring and ambiguity detection.
//!
//! Each optimized hypothesis gets a confidence from a sharp softmax over its
//! fit score; confident hypotheses that disagree in rotation raise a scalar
//! agreement score. Images whose agreement score exceeds a threshold carry
//! an ambiguous pose (typically a front/back flip) and are rejected until
//! semantics can resolve them.

use crate::geom::{geodesic_distance, UnitQuaternion};

/// Default softmax temperature: IoU values close to the maximum share the
/// confidence, clearly lower ones get almost none.
pub const DEFAULT_TAU: f64 = 0.01;

/// Default acceptance threshold on the agreement score.
pub const DEFAULT_AGREEMENT_THRESHOLD: f64 = 0.3;

/// Scoring summary for one image.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub v_iou: Vec<f64>,
    pub v_conf: Vec<f64>,
    /// Pairwise rotation distances, `d_ij = 1 - (q_i . q_j)^2`.
    pub distance: Vec<Vec<f64>>,
    pub v_agr: f64,
    pub tau: f64,
}

/// Softmax of `v_iou / tau`, stabilized by max subtraction.
pub fn confidence_weights(v_iou: &[f64], tau: f64) -> Vec<f64> {
    assert!(!v_iou.is_empty());
    let max = v_iou.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v_iou.iter().map(|v| ((v - max) / tau).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Pairwise rotation-distance matrix and the confidence-weighted agreement
/// score `v_agr = || D .* (c c^T) ||_1`.
pub fn agreement_score(quats: &[UnitQuaternion], v_conf: &[f64]) -> (Vec<Vec<f64>>, f64) {
    assert_eq!(quats.len(), v_conf.len());
    let n = quats.len();
    let mut dist = vec![vec![0.0; n]; n];
    let mut v_agr = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 0.0 } else { geodesic_distance(quats[i], quats[j]) };
            dist[i][j] = d;
            v_agr += d * v_conf[i] * v_conf[j];
        }
    }
    (dist, v_agr)
}

/// Builds the full scoring report for one image.
pub fn score_hypotheses(v_iou: &[f64], quats: &[UnitQuaternion], tau: f64) -> ScoreReport {
    let v_conf = confidence_weights(v_iou, tau);
    let (distance, v_agr) = agreement_score(quats, &v_conf);
    ScoreReport { v_iou: v_iou.to_vec(), v_conf, distance, v_agr, tau }
}

/// Acceptance rule: rejected strictly above the threshold, so the boundary
/// value itself is accepted.
pub fn ambiguity_filter(v_agr: f64, threshold: f64) -> bool {
    v_agr <= threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_unit_quat(rng: &mut impl Rng) -> UnitQuaternion {
        UnitQuaternion::normalized(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
    }

    #[test]
    fn uniform_ious_give_uniform_confidence() {
        let c = confidence_weights(&[0.7, 0.7, 0.7, 0.7], DEFAULT_TAU);
        for v in &c {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn single_hypothesis_gets_full_confidence() {
        let c = confidence_weights(&[0.42], DEFAULT_TAU);
        assert_eq!(c, vec![1.0]);
    }

    #[test]
    fn confidence_matches_softmax_oracle() {
        // v_iou = (0.9, 0.8) at tau = 0.01 is softmax(90, 80).
        let c = confidence_weights(&[0.9, 0.8], 0.01);
        let e = (-10.0f64).exp();
        let expected = [1.0 / (1.0 + e), e / (1.0 + e)];
        assert!((c[0] - expected[0]).abs() < 1e-12);
        assert!((c[1] - expected[1]).abs() < 1e-12);
        assert!((c[0] - 0.99995).abs() < 1e-5);
        assert!((c[1] - 4.54e-5).abs() < 1e-7);
    }

    #[test]
    fn confidence_is_shift_invariant() {
        let a = confidence_weights(&[0.5, 0.62, 0.3], DEFAULT_TAU);
        let b = confidence_weights(&[0.7, 0.82, 0.5], DEFAULT_TAU);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_rotations_agree_perfectly() {
        let q = UnitQuaternion::from_axis_angle(Vec3::new(0.3, 1.0, -0.2), 0.8);
        let (_, v_agr) = agreement_score(&[q, q, q], &[0.2, 0.5, 0.3]);
        assert!(v_agr < 1e-12);
    }

    #[test]
    fn opposed_equal_confidence_pair_scores_half() {
        // Two hypotheses 180 degrees apart with equal confidence: the
        // distance matrix is [[0,1],[1,0]] and v_agr = 2 * 0.25.
        let q1 = UnitQuaternion::IDENTITY;
        let q2 = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::PI);
        let (d, v_agr) = agreement_score(&[q1, q2], &[0.5, 0.5]);
        assert!((d[0][1] - 1.0).abs() < 1e-12);
        assert!((v_agr - 0.5).abs() < 1e-12);
    }

    #[test]
    fn opposed_lopsided_pair_scores_two_delta() {
        // With confidence (1-delta, delta) the expansion of ||D .* cc^T||_1
        // gives 2 delta (1 - delta).
        let delta = 4.54e-5;
        let q1 = UnitQuaternion::IDENTITY;
        let q2 = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), std::f64::consts::PI);
        let (_, v_agr) = agreement_score(&[q1, q2], &[1.0 - delta, delta]);
        let expected = 2.0 * delta * (1.0 - delta);
        assert!((v_agr - expected).abs() < 1e-15);
        assert!(v_agr < 1e-4);
        assert!(ambiguity_filter(v_agr, DEFAULT_AGREEMENT_THRESHOLD));
    }

    #[test]
    fn filter_boundary_is_inclusive() {
        assert!(!ambiguity_filter(0.5, 0.3));
        assert!(ambiguity_filter(0.0, 0.3));
        assert!(ambiguity_filter(0.3, 0.3));
    }

    #[test]
    fn agreement_invariant_to_sign_flips_and_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..100 {
            let n = rng.gen_range(2..6);
            let quats: Vec<UnitQuaternion> = (0..n).map(|_| random_unit_quat(&mut rng)).collect();
            let ious: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let conf = confidence_weights(&ious, DEFAULT_TAU);
            let (_, base) = agreement_score(&quats, &conf);

            // Sign flip of one quaternion.
            let mut flipped = quats.clone();
            let k = rng.gen_range(0..n);
            flipped[k] = UnitQuaternion::new(-quats[k].w, -quats[k].x, -quats[k].y, -quats[k].z);
            let (_, v_flip) = agreement_score(&flipped, &conf);
            assert!((base - v_flip).abs() < 1e-12);

            // Joint permutation.
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let perm_q: Vec<UnitQuaternion> = order.iter().map(|&i| quats[i]).collect();
            let perm_c: Vec<f64> = order.iter().map(|&i| conf[i]).collect();
            let (_, v_perm) = agreement_score(&perm_q, &perm_c);
            assert!((base - v_perm).abs() < 1e-12);

            assert!((0.0..1.0).contains(&base));
        }
    }
}
