//! Pose algebra: 3-vectors, unit quaternions, and rigid transforms.
//!
//! All positions are in meters, all angles in radians. Quaternions are kept
//! normalized with a canonical sign (`w >= 0`) so that equal rotations compare
//! equal after serialization.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A 3D vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or `None` for a (near-)zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(self * (1.0 / n))
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Angle between two vectors in [0, pi]. Zero vectors yield pi (treated
    /// as maximally misaligned so visibility checks fail closed).
    pub fn angle_to(self, other: Self) -> f64 {
        match (self.normalized(), other.normalized()) {
            (Some(a), Some(b)) => a.dot(b).clamp(-1.0, 1.0).acos(),
            _ => std::f64::consts::PI,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A unit quaternion representing a 3D rotation.
///
/// Invariants: norm within 1e-9 of 1, canonical sign `w >= 0` (with a
/// lexicographic tie-break on (x, y, z) when `w == 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Build from raw components, normalizing and canonicalizing the sign.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }.normalized()
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    /// A zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        match axis.normalized() {
            Some(u) => {
                let half = angle * 0.5;
                let s = half.sin();
                Self::new(half.cos(), u.x * s, u.y * s, u.z * s)
            }
            None => Self::IDENTITY,
        }
    }

    /// Exponential map: rotation vector (axis * angle) to quaternion.
    pub fn from_rotvec(v: Vec3) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(self, other: Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    fn negated(self) -> Self {
        Self { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Restore the canonical sign without touching the norm.
    pub fn canonicalized(self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            self.negated()
        } else {
            self
        }
    }

    /// Renormalize and canonicalize. A zero quaternion becomes the identity.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n < 1e-12 {
            return Self::IDENTITY;
        }
        let inv = 1.0 / n;
        Self {
            w: self.w * inv,
            x: self.x * inv,
            y: self.y * inv,
            z: self.z * inv,
        }
        .canonicalized()
    }

    pub fn conjugate(self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }.canonicalized()
    }

    /// Rotate a vector: q v q*.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let qv = Vec3::new(self.x, self.y, self.z);
        let t = qv.cross(v) * 2.0;
        v + t * self.w + qv.cross(t)
    }

    /// Rotation angle in [0, pi].
    pub fn angle(self) -> f64 {
        // canonical sign makes w >= 0, so the result is the geodesic angle
        2.0 * self.w.abs().clamp(0.0, 1.0).acos()
    }

    /// Geodesic angle between two rotations.
    pub fn angle_to(self, other: Self) -> f64 {
        (self.conjugate() * other).angle()
    }

    /// Spherical linear interpolation from `self` (t = 0) to `other` (t = 1),
    /// along the shorter arc.
    pub fn slerp(self, other: Self, t: f64) -> Self {
        let mut b = other;
        let mut cos_theta = self.dot(other);
        if cos_theta < 0.0 {
            b = b.negated();
            cos_theta = -cos_theta;
        }
        if cos_theta > 1.0 - 1e-12 {
            // nearly parallel: nlerp is exact enough and avoids 0/0
            return Self {
                w: self.w + (b.w - self.w) * t,
                x: self.x + (b.x - self.x) * t,
                y: self.y + (b.y - self.y) * t,
                z: self.z + (b.z - self.z) * t,
            }
            .normalized();
        }
        let theta = cos_theta.clamp(-1.0, 1.0).acos();
        let sin_theta = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / sin_theta;
        let wb = (t * theta).sin() / sin_theta;
        Self {
            w: self.w * wa + b.w * wb,
            x: self.x * wa + b.x * wb,
            y: self.y * wa + b.y * wb,
            z: self.z * wa + b.z * wb,
        }
        .normalized()
    }

    /// Row-major 3x3 rotation matrix.
    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
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

    /// Recover a quaternion from a (proper) rotation matrix, row-major.
    /// Uses the largest-pivot branch for numerical stability.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z);
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[2][1] - m[1][2]) / s;
            y = (m[0][2] - m[2][0]) / s;
            z = (m[1][0] - m[0][1]) / s;
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            w = (m[2][1] - m[1][2]) / s;
            x = 0.25 * s;
            y = (m[0][1] + m[1][0]) / s;
            z = (m[0][2] + m[2][0]) / s;
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            w = (m[0][2] - m[2][0]) / s;
            x = (m[0][1] + m[1][0]) / s;
            y = 0.25 * s;
            z = (m[1][2] + m[2][1]) / s;
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            w = (m[1][0] - m[0][1]) / s;
            x = (m[0][2] + m[2][0]) / s;
            y = (m[1][2] + m[2][1]) / s;
            z = 0.25 * s;
        }
        Self::new(w, x, y, z)
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;

    /// Hamilton product, renormalized with canonical sign.
    fn mul(self, rhs: UnitQuat) -> UnitQuat {
        UnitQuat {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        }
        .normalized()
    }
}

/// A rigid transform: rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuat,
    pub translation: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { rotation: UnitQuat::IDENTITY, translation: Vec3::ZERO };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    pub fn new(rotation: UnitQuat, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: UnitQuat::IDENTITY, translation }
    }

    pub fn from_rotation(rotation: UnitQuat) -> Self {
        Self { rotation, translation: Vec3::ZERO }
    }

    /// Composition `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rotation.conjugate();
        Pose {
            rotation: inv_rot,
            translation: -inv_rot.rotate(self.translation),
        }
    }

    /// Apply to a point: rotate then translate.
    pub fn apply(&self, point: Vec3) -> Vec3 {
        self.rotation.rotate(point) + self.translation
    }

    /// Max of rotation angle (rad) and translation distance (m) to another
    /// pose; a cheap "how different" metric for near-identity comparisons.
    pub fn deviation_from(&self, other: &Pose) -> f64 {
        let dr = self.rotation.angle_to(other.rotation);
        let dt = (self.translation - other.translation).norm();
        dr.max(dt)
    }
}

// Wire format: flat {qw,qx,qy,qz,tx,ty,tz}.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    tx: f64,
    ty: f64,
    tz: f64,
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            qw: self.rotation.w,
            qx: self.rotation.x,
            qy: self.rotation.y,
            qz: self.rotation.z,
            tx: self.translation.x,
            ty: self.translation.y,
            tz: self.translation.z,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(deserializer)?;
        Ok(Pose {
            rotation: UnitQuat { w: r.qw, x: r.qx, y: r.qy, z: r.qz },
            translation: Vec3::new(r.tx, r.ty, r.tz),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn compose_with_identity() {
        let p = Pose::new(
            UnitQuat::from_axis_angle(Vec3::new(1.0, 2.0, -0.5), 0.7),
            Vec3::new(3.0, -1.0, 2.0),
        );
        let c = Pose::identity().compose(&p);
        assert!(c.deviation_from(&p) < 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let p = Pose::new(
            UnitQuat::from_axis_angle(Vec3::new(0.3, -1.0, 0.8), 1.9),
            Vec3::new(-2.0, 5.0, 0.25),
        );
        let c = p.compose(&p.inverse());
        assert!(c.deviation_from(&Pose::identity()) < 1e-9);
    }

    #[test]
    fn inverse_of_pure_translation() {
        let p = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let inv = p.inverse();
        assert_abs_diff_eq!(inv.translation.x, -1.0);
        assert_abs_diff_eq!(inv.translation.y, -2.0);
        assert_abs_diff_eq!(inv.translation.z, -3.0);
        assert_eq!(inv.rotation, UnitQuat::identity());
    }

    #[test]
    fn rz_half_turns_compose() {
        let rz90 = Pose::from_rotation(UnitQuat::from_axis_angle(Vec3::Z, FRAC_PI_2));
        let rz180 = Pose::from_rotation(UnitQuat::from_axis_angle(Vec3::Z, PI));
        let c = rz90.compose(&rz90);
        assert!(c.deviation_from(&rz180) < 1e-9);
    }

    #[test]
    fn apply_axis_rotation() {
        let p = Pose::from_rotation(UnitQuat::from_axis_angle(Vec3::Z, FRAC_PI_2));
        let v = p.apply(Vec3::X);
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_apply_is_noop() {
        let v = Pose::identity().apply(Vec3::X);
        assert_eq!(v, Vec3::X);
    }

    #[test]
    fn canonical_sign_restored_after_multiplication() {
        let q = UnitQuat::from_axis_angle(Vec3::Y, 3.0);
        let prod = q * q; // 6 rad > pi, raw product would have w < 0
        assert!(prod.w >= 0.0);
        assert_abs_diff_eq!(prod.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_roundtrip() {
        let q = UnitQuat::from_axis_angle(Vec3::new(1.0, -2.0, 0.4), 2.6);
        let back = UnitQuat::from_matrix(&q.to_matrix());
        assert!(q.angle_to(back) < 1e-9);
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = UnitQuat::identity();
        let b = UnitQuat::from_axis_angle(Vec3::Z, 0.5);
        assert!(a.slerp(b, 0.0).angle_to(a) < 1e-12);
        assert!(a.slerp(b, 1.0).angle_to(b) < 1e-12);
        let mid = a.slerp(b, 0.5);
        assert_abs_diff_eq!(mid.angle(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn pose_json_field_names() {
        let p = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"qw":1.0,"qx":0.0,"qy":0.0,"qz":0.0,"tx":1.0,"ty":2.0,"tz":3.0}"#);
        let back: Pose = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
