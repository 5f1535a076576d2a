use serde::{Deserialize, Serialize};

/// Quaternion `w + xi + yj + zk`; unit quaternions represent rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation by `angle` about the (not necessarily normalized) `axis`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, r: &Self) -> Self {
        Self::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }

    /// Representative of `±q` with non-negative leading nonzero component.
    pub fn canonical(&self) -> Self {
        for c in self.as_array() {
            if c > 0.0 {
                return *self;
            }
            if c < 0.0 {
                return self.neg();
            }
        }
        *self
    }

    /// Rotation angle in `[0, π]` of `self⁻¹ * other`, treating `q` and `-q` as equal.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let other = if self.dot(other) < 0.0 { other.neg() } else { *other };
        let diff = Quaternion::new(
            self.w - other.w,
            self.x - other.x,
            self.y - other.y,
            self.z - other.z,
        );
        let sum = Quaternion::new(
            self.w + other.w,
            self.x + other.x,
            self.y + other.y,
            self.z + other.z,
        );
        4.0 * diff.norm().atan2(sum.norm())
    }

    /// Row-major 3×3 rotation matrix of a unit quaternion.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_with_conjugate_is_identity() {
        let q = Quaternion::from_axis_angle([1.0, 2.0, -0.5], 1.3);
        let p = q.mul(&q.conjugate());
        assert!((p.w - 1.0).abs() < 1e-15);
        assert!(p.x.abs() < 1e-15 && p.y.abs() < 1e-15 && p.z.abs() < 1e-15);
    }

    #[test]
    fn angle_matches_rotation_matrix_trace() {
        let q = Quaternion::from_axis_angle([0.3, -1.0, 0.7], 2.2);
        let m = q.rotation_matrix();
        let trace = m[0][0] + m[1][1] + m[2][2];
        let from_trace = ((trace - 1.0) / 2.0).acos();
        assert!((Quaternion::IDENTITY.angle_to(&q) - from_trace).abs() < 1e-12);
        assert!((Quaternion::IDENTITY.angle_to(&q.neg()) - 2.2).abs() < 1e-12);
    }
}
