use super::{quat_rotate, UnitQuaternion, Vec3};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The 8-parameter augmented weak-perspective camera.
///
/// A vertex `v` is rotated to `v' = R(q) v`, then projected to screen
/// coordinates
///
/// ```text
/// p = s * (v'_x, v'_y) / (1 + z0 * v'_z) + t
/// ```
///
/// with screen coordinates in `[-1, 1]^2` mapped to pixels by
/// `(x + 1) / 2 * W`. At `z0 = 0` this reduces to pure weak perspective;
/// `z0 > 0` approximates perspective foreshortening for close objects, with
/// `v'_z` acting as the depth used for occlusion ordering (smaller = nearer).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Rotation applied to model-space vertices.
    pub q: UnitQuaternion,
    /// Uniform scale, screen units per model unit. Must be positive.
    pub s: f64,
    /// Screen-space translation in normalized coordinates.
    pub t: [f64; 2],
    /// Inverse-depth perspective strength. Must be non-negative and small
    /// enough that `1 + z0 * v'_z > 0` for every rendered vertex.
    pub z0: f64,
}

impl CameraPose {
    pub fn new(q: UnitQuaternion, s: f64, t: [f64; 2], z0: f64) -> Self {
        CameraPose { q, s, t, z0 }
    }

    pub fn identity() -> Self {
        CameraPose { q: UnitQuaternion::IDENTITY, s: 1.0, t: [0.0, 0.0], z0: 0.0 }
    }

    /// Flat parameter vector in optimizer order: `[q; s; t; z0]`.
    pub fn to_params(&self) -> [f64; 8] {
        [self.q.w, self.q.x, self.q.y, self.q.z, self.s, self.t[0], self.t[1], self.z0]
    }

    pub fn from_params(p: &[f64; 8]) -> Self {
        CameraPose {
            q: UnitQuaternion::new(p[0], p[1], p[2], p[3]),
            s: p[4],
            t: [p[5], p[6]],
            z0: p[7],
        }
    }
}

/// Projects `vertices` through `pose`, returning screen coordinates and the
/// per-vertex depth `v'_z`.
///
/// Fails with [`Error::PoleCrossing`] if the perspective denominator
/// `1 + z0 * v'_z` is not strictly positive for some vertex.
pub fn project(pose: &CameraPose, vertices: &[Vec3]) -> Result<Vec<([f64; 2], f64)>> {
    let mut out = Vec::with_capacity(vertices.len());
    for (i, &v) in vertices.iter().enumerate() {
        let r = quat_rotate(pose.q, v);
        let denom = 1.0 + pose.z0 * r.z;
        if denom <= 0.0 {
            return Err(Error::PoleCrossing { vertex: i, denom });
        }
        let x = pose.s * r.x / denom + pose.t[0];
        let y = pose.s * r.y / denom + pose.t[1];
        out.push(([x, y], r.z));
    }
    Ok(out)
}

/// Rotation that views the origin from direction `(azimuth, elevation)`.
///
/// Azimuth is measured in the model xy-plane from the +x axis (the template
/// front), elevation from the plane toward +z (the template up axis). The
/// returned rotation maps model space to camera space such that depth
/// increases away from the camera and the model up axis appears upward on
/// screen. Degenerate at elevation = +-90 degrees.
pub fn look_at_quaternion(azimuth_rad: f64, elevation_rad: f64) -> UnitQuaternion {
    let d = Vec3::new(
        elevation_rad.cos() * azimuth_rad.cos(),
        elevation_rad.cos() * azimuth_rad.sin(),
        elevation_rad.sin(),
    );
    // Camera basis: depth axis points away from the camera.
    let z_c = -d;
    let up = Vec3::new(0.0, 0.0, 1.0);
    let y_c = (up - z_c * up.dot(z_c)).normalized();
    let x_c = y_c.cross(z_c);
    rotation_rows_to_quat(x_c, y_c, z_c)
}

/// Converts a row-basis rotation matrix (rows = camera axes in model space)
/// to a quaternion. Standard trace-based branching.
fn rotation_rows_to_quat(r0: Vec3, r1: Vec3, r2: Vec3) -> UnitQuaternion {
    let m = [[r0.x, r0.y, r0.z], [r1.x, r1.y, r1.z], [r2.x, r2.y, r2.z]];
    let trace = m[0][0] + m[1][1] + m[2][2];
    let q = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        UnitQuaternion::new(
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        )
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        UnitQuaternion::new(
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        )
    } else if m[1][1] > m[2][2] {
        let s = (1.0 - m[0][0] + m[1][1] - m[2][2]).sqrt() * 2.0;
        UnitQuaternion::new(
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        )
    } else {
        let s = (1.0 - m[0][0] - m[1][1] + m[2][2]).sqrt() * 2.0;
        UnitQuaternion::new(
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        )
    };
    q.renormalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weak_perspective_identity() {
        let pose = CameraPose::identity();
        let p = project(&pose, &[Vec3::new(0.5, 0.5, 0.3)]).unwrap();
        assert_eq!(p[0].0, [0.5, 0.5]);
        assert_eq!(p[0].1, 0.3);
    }

    #[test]
    fn translation_additivity() {
        let pose = CameraPose::new(UnitQuaternion::IDENTITY, 1.0, [0.1, -0.2], 0.0);
        let p = project(&pose, &[Vec3::new(0.5, 0.5, 0.3)]).unwrap();
        assert!((p[0].0[0] - 0.6).abs() < 1e-15);
        assert!((p[0].0[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn perspective_correction_divides_by_depth_term() {
        // x = 1 / (1 + 0.5 * 1) per the projection formula.
        let pose = CameraPose::new(UnitQuaternion::IDENTITY, 1.0, [0.0, 0.0], 0.5);
        let p = project(&pose, &[Vec3::new(1.0, 0.0, 1.0)]).unwrap();
        assert!((p[0].0[0] - 1.0 / 1.5).abs() < 1e-15);
        assert!((p[0].0[0] - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn pole_crossing_detected() {
        let pose = CameraPose::new(UnitQuaternion::IDENTITY, 1.0, [0.0, 0.0], 2.0);
        let err = project(&pose, &[Vec3::new(0.0, 0.0, -0.6)]).unwrap_err();
        assert!(matches!(err, Error::PoleCrossing { .. }));
    }

    #[test]
    fn weak_perspective_is_affine_in_scale_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let q = UnitQuaternion::normalized(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let s = rng.gen_range(0.2..2.0);
            let t = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let base = project(&CameraPose::new(q, 1.0, [0.0, 0.0], 0.0), &[v]).unwrap()[0].0;
            let full = project(&CameraPose::new(q, s, t, 0.0), &[v]).unwrap()[0].0;
            // Exact identity: division by 1.0 is exact in IEEE arithmetic.
            assert_eq!(full[0], s * base[0] + t[0]);
            assert_eq!(full[1], s * base[1] + t[1]);
        }
    }

    #[test]
    fn look_at_front_view_faces_camera() {
        // Azimuth 0: the +x (front) axis should point straight at the camera,
        // i.e. have the smallest possible depth.
        let q = look_at_quaternion(0.0, 0.0);
        let front = quat_rotate(q, Vec3::new(1.0, 0.0, 0.0));
        assert!((front.z + 1.0).abs() < 1e-12);
        // The model up axis stays up on screen.
        let up = quat_rotate(q, Vec3::new(0.0, 0.0, 1.0));
        assert!((up.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn look_at_views_are_unit_quaternions() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let q = look_at_quaternion(rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-1.2..1.2));
            assert!((q.norm() - 1.0).abs() < 1e-9);
        }
    }
}
