//! Rigid transforms in SE(3).
//!
//! Every frame relation in the planner (world to object, platform to arm
//! base, arm base to end-effector, object to end-effector) is a [`Pose`].
//! Rotations are stored as 3×3 matrices; interpolation goes through the
//! rotation logarithm so the path follows the shortest arc.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rigid transform: rotate by `rotation`, then translate by `translation`.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rpy = self.rpy_deg();
        write!(
            f,
            "Pose(t=[{:.6}, {:.6}, {:.6}], rpy_deg=[{:.4}, {:.4}, {:.4}])",
            self.translation.x, self.translation.y, self.translation.z, rpy.x, rpy.y, rpy.z
        )
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Matrix3::identity(), Vector3::new(x, y, z))
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Rotation of `angle` radians about a unit `axis` through the origin.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Self::from_rotation(exp_so3(&(axis * angle)))
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), angle)
    }

    /// Builds a pose from a translation in meters and extrinsic XYZ
    /// fixed angles (roll, pitch, yaw) in degrees.
    pub fn from_xyz_rpy_deg(translation: [f64; 3], rpy_deg: [f64; 3]) -> Self {
        let rot = Rotation3::from_euler_angles(
            rpy_deg[0].to_radians(),
            rpy_deg[1].to_radians(),
            rpy_deg[2].to_radians(),
        );
        Self::new(*rot.matrix(), Vector3::from(translation))
    }

    /// Extrinsic XYZ fixed angles in degrees.
    pub fn rpy_deg(&self) -> Vector3<f64> {
        let (r, p, y) = Rotation3::from_matrix_unchecked(self.rotation).euler_angles();
        Vector3::new(r.to_degrees(), p.to_degrees(), y.to_degrees())
    }

    /// `self` followed by `other` in the frame chain: `self · other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Geodesic interpolation: translation linear in `s`, rotation along
    /// the shortest arc between the two orientations.
    pub fn interpolate(&self, other: &Pose, s: f64) -> Result<Pose> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ParameterOutOfRange { value: s });
        }
        if s == 0.0 {
            return Ok(*self);
        }
        if s == 1.0 {
            return Ok(*other);
        }
        let rel = self.rotation.transpose() * other.rotation;
        let omega = log_so3(&rel);
        let rotation = orthonormalize(&(self.rotation * exp_so3(&(omega * s))));
        let translation = self.translation.lerp(&other.translation, s);
        Ok(Pose {
            rotation,
            translation,
        })
    }

    /// Translational distance (m) and rotation angle (rad, in `[0, π]`)
    /// between two poses.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        let dt = (self.translation - other.translation).norm();
        (dt, rotation_angle(&(self.rotation.transpose() * other.rotation)))
    }

    /// Largest elementwise deviation of `RᵀR` from identity and of
    /// `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        e.max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn is_valid(&self) -> bool {
        self.orthonormality_error() <= 1e-9
            && self.translation.iter().all(|v| v.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

/// Free-standing form of [`Pose::distance`].
pub fn pose_distance(a: &Pose, b: &Pose) -> (f64, f64) {
    a.distance(b)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula.
pub fn exp_so3(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let k = skew(omega);
    if theta < 1e-8 {
        // second-order series
        return Matrix3::identity() + k + k * k * 0.5;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation angle in `[0, π]`, accurate near zero.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let v = vee_antisym(r);
    let c = (r.trace() - 1.0) * 0.5;
    v.norm().atan2(c)
}

fn vee_antisym(r: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5
}

/// Rotation logarithm as a rotation vector (axis × angle). At exactly π the
/// axis sign is fixed by making its largest component positive.
pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let theta = rotation_angle(r);
    let v = vee_antisym(r);
    if theta < 1e-8 {
        return v;
    }
    if PI - theta > 1e-6 {
        return v * (theta / theta.sin());
    }
    // Near π: recover the axis from the symmetric part,
    // (R + Rᵀ)/2 = cos θ·I + (1 − cos θ)·nnᵀ.
    let c = theta.cos();
    let b = ((r + r.transpose()) * 0.5 - Matrix3::identity() * c) / (1.0 - c);
    let diag = Vector3::new(b[(0, 0)], b[(1, 1)], b[(2, 2)]);
    let i = diag.imax();
    let mut n = b.column(i).into_owned() / diag[i].max(0.0).sqrt().max(1e-300);
    n.normalize_mut();
    // v = sin(θ)·n carries the sign when θ < π.
    if v.dot(&n) < 0.0 {
        n = -n;
    }
    if v.norm() < 1e-12 && n[n.iamax()] < 0.0 {
        n = -n;
    }
    n * theta
}

/// Projects a near-rotation onto SO(3) via polar decomposition.
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    r
}

/// File representation: meters and extrinsic XYZ degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub translation: [f64; 3],
    pub rpy_deg: [f64; 3],
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        let rpy = p.rpy_deg();
        PoseRecord {
            translation: [p.translation.x, p.translation.y, p.translation.z],
            rpy_deg: [rpy.x, rpy.y, rpy.z],
        }
    }
}

impl From<&PoseRecord> for Pose {
    fn from(r: &PoseRecord) -> Self {
        Pose::from_xyz_rpy_deg(r.translation, r.rpy_deg)
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = PoseRecord::deserialize(d)?;
        if rec.translation.iter().chain(rec.rpy_deg.iter()).any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("pose components must be finite"));
        }
        Ok(Pose::from(&rec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            prop::array::uniform3(-2.0f64..2.0),
            prop::array::uniform3(-1.0f64..1.0),
            0.0f64..PI,
        )
            .prop_map(|(t, axis, angle)| {
                let a = Vector3::from(axis);
                let a = if a.norm() < 1e-3 { Vector3::z() } else { a.normalize() };
                let mut p = Pose::from_axis_angle(&a, angle);
                p.translation = Vector3::from(t);
                p
            })
    }

    fn close(a: &Pose, b: &Pose, tol: f64) -> bool {
        (a.rotation - b.rotation).abs().max() <= tol
            && (a.translation - b.translation).abs().max() <= tol
    }

    /// Independent unit-quaternion slerp, written from scratch.
    fn quat_of(m: &Matrix3<f64>) -> [f64; 4] {
        let tr = m.trace();
        let (w, x, y, z);
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        [w, x, y, z]
    }

    fn mat_of(q: [f64; 4]) -> Matrix3<f64> {
        let [w, x, y, z] = q;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    fn slerp(a: [f64; 4], b: [f64; 4], s: f64) -> [f64; 4] {
        let mut dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let mut b = b;
        if dot < 0.0 {
            dot = -dot;
            b = b.map(|v| -v);
        }
        let omega = dot.min(1.0).acos();
        let (ka, kb) = if omega < 1e-9 {
            (1.0 - s, s)
        } else {
            (((1.0 - s) * omega).sin() / omega.sin(), (s * omega).sin() / omega.sin())
        };
        let mut q = [0.0; 4];
        for i in 0..4 {
            q[i] = ka * a[i] + kb * b[i];
        }
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.map(|v| v / n)
    }

    #[test]
    fn identity_compose() {
        let i = Pose::identity();
        assert_eq!(i.compose(&i), i);
        assert_eq!(i.inverse(), i);
    }

    #[test]
    fn inverse_of_translation() {
        let p = Pose::from_translation(1.0, 2.0, 3.0).inverse();
        assert_eq!(p.translation, Vector3::new(-1.0, -2.0, -3.0));
        assert_eq!(p.rotation, Matrix3::identity());
    }

    #[test]
    fn frame_chain_reproduces_direct_product() {
        // world→platform, platform→base, base→ee, ee→object assembled by hand
        let wp = Pose::from_xyz_rpy_deg([1.0, -0.5, 0.0], [0.0, 0.0, 30.0]);
        let pb = Pose::from_xyz_rpy_deg([0.1, 0.0, 0.35], [0.0, 0.0, 0.0]);
        let be = Pose::from_xyz_rpy_deg([0.4, 0.2, 0.3], [10.0, -20.0, 45.0]);
        let eo = Pose::from_xyz_rpy_deg([0.0, 0.0, 0.1], [180.0, 0.0, 0.0]);
        let chained = wp.compose(&pb).compose(&be).compose(&eo);
        let mut h = nalgebra::Matrix4::identity();
        for p in [wp, pb, be, eo] {
            let mut m = nalgebra::Matrix4::identity();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&p.rotation);
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p.translation);
            h *= m;
        }
        let direct = Pose::new(h.fixed_view::<3, 3>(0, 0).into(), h.fixed_view::<3, 1>(0, 3).into());
        assert!(close(&chained, &direct, 1e-12));
    }

    #[test]
    fn interpolate_rejects_out_of_range() {
        let a = Pose::identity();
        assert!(a.interpolate(&a, -0.1).is_err());
        assert!(a.interpolate(&a, 1.5).is_err());
    }

    #[test]
    fn half_turn_midpoint_is_quarter_turn() {
        let a = Pose::identity();
        let b = Pose::rot_x(PI);
        let m = a.interpolate(&b, 0.5).unwrap();
        assert!(close(&m, &Pose::rot_x(PI / 2.0), 1e-12));
    }

    #[test]
    fn distance_examples() {
        let p = Pose::from_xyz_rpy_deg([0.3, 0.1, -0.2], [20.0, 30.0, 40.0]);
        assert_eq!(p.distance(&p), (0.0, 0.0));
        let (dt, dr) = Pose::identity().distance(&Pose::rot_z(PI / 2.0));
        assert_eq!(dt, 0.0);
        assert!((dr - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rpy_round_trip() {
        let p = Pose::from_xyz_rpy_deg([0.0, 0.0, 0.0], [90.0, 0.0, 0.0]);
        assert!(close(&p, &Pose::rot_x(PI / 2.0), 1e-15));
        // extrinsic XYZ: yaw applied last about the fixed z axis
        let q = Pose::from_xyz_rpy_deg([0.0; 3], [10.0, 20.0, 30.0]);
        let expect = Pose::rot_z(30f64.to_radians()) * Pose::rot_y(20f64.to_radians()) * Pose::rot_x(10f64.to_radians());
        assert!(close(&q, &expect, 1e-14));
        let rpy = q.rpy_deg();
        assert!((rpy - Vector3::new(10.0, 20.0, 30.0)).norm() < 1e-10);
    }

    #[test]
    fn log_near_pi_is_consistent() {
        for axis in [Vector3::x(), Vector3::y(), Vector3::new(1.0, -2.0, 0.5).normalize()] {
            for angle in [PI, PI - 1e-7, PI - 1e-4] {
                let r = exp_so3(&(axis * angle));
                let w = log_so3(&r);
                assert!((exp_so3(&w) - r).abs().max() < 1e-9, "{axis:?} {angle}");
            }
        }
    }

    proptest! {
        #[test]
        fn compose_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            prop_assert!(close(&((a * b) * c), &(a * (b * c)), 1e-12));
        }

        #[test]
        fn inverse_properties(a in arb_pose()) {
            prop_assert!(close(&(a * a.inverse()), &Pose::identity(), 1e-12));
            prop_assert!(close(&a.inverse().inverse(), &a, 1e-12));
            prop_assert!((a * a.inverse()).orthonormality_error() < 1e-9);
        }

        #[test]
        fn interpolate_matches_quaternion_slerp(a in arb_pose(), b in arb_pose()) {
            let s = 0.25;
            let m = a.interpolate(&b, s).unwrap();
            let q = slerp(quat_of(&a.rotation), quat_of(&b.rotation), s);
            prop_assert!((m.rotation - mat_of(q)).abs().max() < 1e-9);
            prop_assert!((m.translation - (a.translation * 0.75 + b.translation * 0.25)).norm() < 1e-12);
            prop_assert!(m.orthonormality_error() < 1e-9);
        }

        #[test]
        fn interpolate_endpoints_and_monotone(a in arb_pose(), b in arb_pose()) {
            prop_assert_eq!(a.interpolate(&b, 0.0).unwrap(), a);
            prop_assert_eq!(a.interpolate(&b, 1.0).unwrap(), b);
            let mut last = 0.0;
            for k in 0..=20 {
                let s = k as f64 / 20.0;
                let d = a.distance(&a.interpolate(&b, s).unwrap()).1;
                prop_assert!(d + 1e-12 >= last);
                last = d;
            }
        }

        #[test]
        fn distance_matches_axis_angle(a in arb_pose(), b in arb_pose()) {
            let (dt, dr) = a.distance(&b);
            prop_assert!((dt - (a.translation - b.translation).norm()).abs() < 1e-12);
            let rel = Rotation3::from_matrix_unchecked(a.rotation.transpose() * b.rotation);
            prop_assert!((dr - rel.angle()).abs() < 1e-7);
            prop_assert!((0.0..=PI).contains(&dr));
        }
    }
}
