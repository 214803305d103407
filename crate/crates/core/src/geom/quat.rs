use super::Vec3;
use serde::{Deserialize, Serialize};

/// A rotation stored as a quaternion in (w, x, y, z) order.
///
/// The toolkit keeps quaternions at unit norm; normalization is the caller's
/// duty and is checked with debug assertions only. `q` and `-q` encode the
/// same rotation (double cover), and every rotation-distance computation in
/// this crate is invariant to that sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds a quaternion from raw components without normalizing.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        UnitQuaternion { w, x, y, z }
    }

    /// Builds a unit quaternion from raw components, normalizing them.
    pub fn normalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        UnitQuaternion { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    /// Rotation by `angle` radians about `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized();
        let (s, c) = (angle * 0.5).sin_cos();
        UnitQuaternion { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    pub fn dot(self, o: UnitQuaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn renormalize(self) -> Self {
        let n = self.norm();
        UnitQuaternion { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    /// Hamilton product `self * o` (apply `o` first, then `self`).
    pub fn mul(self, o: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn as_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        UnitQuaternion { w: a[0], x: a[1], y: a[2], z: a[3] }
    }

    /// Row-major 3x3 rotation matrix.
    ///
    /// Uses the homogeneous (quadratic) form, which for a non-unit quaternion
    /// equals `|q|^2` times the rotation of `q/|q|`; this keeps the mapping
    /// smooth in the raw components, which the differentiable renderer relies
    /// on when camera parameters are perturbed off the unit sphere.
    pub fn rotation_matrix(self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ]
    }
}

/// Rotates `v` by the unit quaternion `q`.
pub fn quat_rotate(q: UnitQuaternion, v: Vec3) -> Vec3 {
    debug_assert!((q.norm() - 1.0).abs() < 1e-3, "quat_rotate expects a unit quaternion");
    let m = q.rotation_matrix();
    Vec3 {
        x: m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        y: m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        z: m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    }
}

/// Geodesic distance between two rotations: `1 - (p . q)^2`.
///
/// Zero iff the rotations match (up to quaternion sign), one iff they are
/// 180 degrees apart. Both inputs must be unit quaternions.
pub fn geodesic_distance(p: UnitQuaternion, q: UnitQuaternion) -> f64 {
    let d = p.dot(q);
    (1.0 - d * d).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_unit_quat(rng: &mut impl Rng) -> UnitQuaternion {
        loop {
            let q = UnitQuaternion::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = q.norm();
            if n > 1e-3 {
                return q.renormalize();
            }
        }
    }

    #[test]
    fn rotate_identity() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        let r = quat_rotate(UnitQuaternion::IDENTITY, v);
        assert_eq!(r, v);
    }

    #[test]
    fn rotate_half_turn_about_z() {
        let q = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::PI);
        let r = quat_rotate(q, Vec3::new(1.0, 0.0, 0.0));
        assert!((r.x + 1.0).abs() < 1e-12);
        assert!(r.y.abs() < 1e-12);
        assert!(r.z.abs() < 1e-12);
    }

    #[test]
    fn rotation_preserves_norm_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = random_unit_quat(&mut rng);
            let v = Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let r = quat_rotate(q, v);
            assert!((r.norm() - v.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_preserves_pairwise_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let q = random_unit_quat(&mut rng);
            let a = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (ra, rb) = (quat_rotate(q, a), quat_rotate(q, b));
            assert!((ra.dot(rb) - a.dot(b)).abs() < 1e-9);
        }
    }

    #[test]
    fn geodesic_identity_and_double_cover() {
        assert_eq!(geodesic_distance(UnitQuaternion::IDENTITY, UnitQuaternion::IDENTITY), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let p = random_unit_quat(&mut rng);
            assert!(geodesic_distance(p, p) < 1e-12);
            let n = UnitQuaternion::new(-p.w, -p.x, -p.y, -p.z);
            assert!(geodesic_distance(p, n) < 1e-12);
        }
    }

    #[test]
    fn geodesic_quarter_turn() {
        // p = identity, q = 90 deg about z: dot = cos(45 deg), GD = 1 - 1/2.
        let q = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let expected = 1.0 - std::f64::consts::FRAC_PI_4.cos().powi(2);
        let gd = geodesic_distance(UnitQuaternion::IDENTITY, q);
        assert!((gd - 0.5).abs() < 1e-12);
        assert!((gd - expected).abs() < 1e-12);
    }

    #[test]
    fn geodesic_symmetric_sign_invariant_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..500 {
            let p = random_unit_quat(&mut rng);
            let q = random_unit_quat(&mut rng);
            let d = geodesic_distance(p, q);
            assert!((0.0..=1.0).contains(&d));
            assert_eq!(d, geodesic_distance(q, p));
            let pn = UnitQuaternion::new(-p.w, -p.x, -p.y, -p.z);
            assert!((d - geodesic_distance(pn, q)).abs() < 1e-12);
        }
    }
}
