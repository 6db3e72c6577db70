//! Kinematics of a single mobile manipulator.
//!
//! A robot is an omnidirectional platform `(x, y, θ)` carrying a six-joint
//! revolute arm on a fixed mount. The end-effector pose in the world is
//! `fk_platform(q_p) · mount · fk_arm(q_m)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix6, Vector3, Vector6};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{log_so3, Pose};
use crate::scene::LinkCapsule;

pub type ArmConfig = Vector6<f64>;
pub type Jacobian = Matrix6<f64>;

/// One revolute joint: a fixed offset from the previous link frame followed
/// by a rotation about `axis` (unit, expressed after the offset).
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub offset: Pose,
    pub axis: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub joints: Vec<Joint>,
    /// Per-joint `[lo, hi]` in radians. Angles are unwrapped; limits apply in ℝ.
    pub limits: Vec<[f64; 2]>,
    /// Flange to end-effector.
    pub tool: Pose,
}

/// Platform workspace box. `theta` is checked modulo 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformBounds {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub theta: [f64; 2],
}

impl PlatformBounds {
    pub fn unbounded() -> Self {
        Self {
            x: [f64::NEG_INFINITY, f64::INFINITY],
            y: [f64::NEG_INFINITY, f64::INFINITY],
            theta: [-PI, PI],
        }
    }

    /// Bounds collapsed onto a single platform pose.
    pub fn pinned(q_p: &Vector3<f64>) -> Self {
        Self {
            x: [q_p.x, q_p.x],
            y: [q_p.y, q_p.y],
            theta: [q_p.z, q_p.z],
        }
    }

    pub fn contains(&self, q_p: &Vector3<f64>) -> bool {
        const EPS: f64 = 1e-12;
        if q_p.x < self.x[0] - EPS || q_p.x > self.x[1] + EPS {
            return false;
        }
        if q_p.y < self.y[0] - EPS || q_p.y > self.y[1] + EPS {
            return false;
        }
        let [lo, hi] = self.theta;
        if hi - lo >= TAU - EPS {
            return true;
        }
        let rel = (q_p.z - lo).rem_euclid(TAU);
        rel <= hi - lo + EPS || rel >= TAU - EPS
    }

    pub fn is_pinned(&self) -> bool {
        self.x[0] == self.x[1] && self.y[0] == self.y[1] && self.theta[0] == self.theta[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformModel {
    /// Platform frame to arm base frame; fixed for the model's lifetime.
    pub mount: Pose,
    pub bounds: PlatformBounds,
}

/// Full configuration: platform `(x, y, θ)` and six arm joints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub platform: Vector3<f64>,
    pub arm: ArmConfig,
}

impl Config {
    pub fn new(platform: Vector3<f64>, arm: ArmConfig) -> Self {
        Self { platform, arm }
    }

    /// Linear blend; θ follows the shorter angular direction.
    pub fn lerp(&self, other: &Config, s: f64) -> Config {
        let dth = wrap_angle(other.platform.z - self.platform.z);
        let mut platform = self.platform.lerp(&other.platform, s);
        platform.z = self.platform.z + s * dth;
        Config {
            platform,
            arm: self.arm.lerp(&other.arm, s),
        }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub max_iters: usize,
    pub pos_tol: f64,
    pub rot_tol: f64,
    pub damping: f64,
    /// Largest per-joint update in one iteration (rad).
    pub max_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            pos_tol: 1e-9,
            rot_tol: 1e-9,
            damping: 1e-3,
            max_step: 0.5,
        }
    }
}

impl ArmModel {
    pub fn new(joints: Vec<Joint>, limits: Vec<[f64; 2]>, tool: Pose) -> Result<Self> {
        let arm = Self {
            joints,
            limits,
            tool,
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.len() != 6 {
            return Err(Error::InvalidModel(format!(
                "arm must have exactly 6 joints, found {}",
                self.joints.len()
            )));
        }
        if self.limits.len() != 6 {
            return Err(Error::InvalidModel("arm must have 6 joint limits".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("joint {i} axis is not unit length")));
            }
            if !j.offset.is_valid() {
                return Err(Error::InvalidModel(format!("joint {i} offset is not a rigid transform")));
            }
        }
        for (i, [lo, hi]) in self.limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidModel(format!("joint {i} limits need lo < hi")));
            }
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &ArmConfig) -> bool {
        q.iter()
            .zip(&self.limits)
            .all(|(v, [lo, hi])| *v >= lo - 1e-12 && *v <= hi + 1e-12)
    }

    pub fn clamp(&self, q: &mut ArmConfig) {
        for (v, [lo, hi]) in q.iter_mut().zip(&self.limits) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Frames after each joint rotation, in the arm base frame.
    pub fn link_frames(&self, q: &ArmConfig) -> [Pose; 6] {
        let mut frames = [Pose::identity(); 6];
        let mut t = Pose::identity();
        for (i, j) in self.joints.iter().enumerate() {
            t = t * j.offset * Pose::from_axis_angle(&j.axis, q[i]);
            frames[i] = t;
        }
        frames
    }

    pub fn fk(&self, q: &ArmConfig) -> Pose {
        self.link_frames(q)[5] * self.tool
    }

    /// Geometric Jacobian in the arm base frame. Rows 0..3 are linear
    /// velocity of the end-effector point, rows 3..6 angular velocity.
    pub fn jacobian(&self, q: &ArmConfig) -> Jacobian {
        let (j, _) = self.jacobian_and_fk(q);
        j
    }

    fn jacobian_and_fk(&self, q: &ArmConfig) -> (Jacobian, Pose) {
        let mut origins = [Vector3::zeros(); 6];
        let mut axes = [Vector3::zeros(); 6];
        let mut t = Pose::identity();
        for (i, j) in self.joints.iter().enumerate() {
            let pre = t * j.offset;
            origins[i] = pre.translation;
            axes[i] = pre.rotation * j.axis;
            t = pre * Pose::from_axis_angle(&j.axis, q[i]);
        }
        let ee = t * self.tool;
        let mut jac = Jacobian::zeros();
        for i in 0..6 {
            let lin = axes[i].cross(&(ee.translation - origins[i]));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&axes[i]);
        }
        (jac, ee)
    }

    /// `√det(J Jᵀ)`. For a square Jacobian this equals `|det J|`, which is what is
    /// evaluated.
    pub fn manipulability(&self, q: &ArmConfig) -> f64 {
        self.jacobian(q).determinant().abs()
    }

    /// Upper bound on the distance from the first joint origin to the
    /// end-effector, over all configurations.
    pub fn reach(&self) -> f64 {
        self.joints[1..].iter().map(|j| j.offset.translation.norm()).sum::<f64>()
            + self.tool.translation.norm()
    }

    /// Position of the first joint axis origin in the base frame; fixed
    /// for every configuration.
    pub fn root(&self) -> Vector3<f64> {
        self.joints[0].offset.translation
    }

    /// Damped least-squares IK for an end-effector `target` expressed in the
    /// arm base frame. `None` when the solver does not reach tolerance within
    /// limits from this seed.
    pub fn ik(&self, target: &Pose, seed: &ArmConfig, opts: &IkOptions) -> Option<ArmConfig> {
        let mut q = *seed;
        self.clamp(&mut q);
        let lambda2 = opts.damping * opts.damping;
        let mut checkpoint = f64::INFINITY;
        for iter in 0..=opts.max_iters {
            let (jac, ee) = self.jacobian_and_fk(&q);
            let ep = target.translation - ee.translation;
            let er = log_so3(&(target.rotation * ee.rotation.transpose()));
            let (pn, rn) = (ep.norm(), er.norm());
            if pn <= opts.pos_tol && rn <= opts.rot_tol {
                return self.within_limits(&q).then_some(q);
            }
            if iter == opts.max_iters {
                break;
            }
            // abort when progress has stalled
            let err = pn + rn;
            if iter % 25 == 0 {
                if iter > 0 && err > 0.8 * checkpoint {
                    return None;
                }
                checkpoint = err;
            }
            let mut e = Vector6::zeros();
            e.fixed_view_mut::<3, 1>(0, 0).copy_from(&ep);
            e.fixed_view_mut::<3, 1>(3, 0).copy_from(&er);
            let a = jac * jac.transpose() + Matrix6::identity() * lambda2;
            let y = a.cholesky()?.solve(&e);
            let mut dq = jac.transpose() * y;
            let big = dq.amax();
            if big > opts.max_step {
                dq *= opts.max_step / big;
            }
            q += dq;
            self.clamp(&mut q);
        }
        None
    }

    pub fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> ArmConfig {
        let mut q = ArmConfig::zeros();
        for (i, [lo, hi]) in self.limits.iter().enumerate() {
            q[i] = rng.gen_range(*lo..=*hi);
        }
        q
    }
}

impl PlatformModel {
    /// World pose of the platform frame: planar translation and yaw.
    pub fn fk(q_p: &Vector3<f64>) -> Pose {
        let mut p = Pose::rot_z(q_p.z);
        p.translation = Vector3::new(q_p.x, q_p.y, 0.0);
        p
    }

    /// World pose of the arm base for a platform configuration.
    pub fn base_pose(&self, q_p: &Vector3<f64>) -> Pose {
        Self::fk(q_p) * self.mount
    }
}

/// A mobile manipulator: platform, arm and per-link collision capsules.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub platform: PlatformModel,
    pub arm: ArmModel,
    /// Link 0 is the platform frame, links 1..=6 the frames after each joint.
    pub capsules: Vec<LinkCapsule>,
}

impl RobotModel {
    pub fn fk_platform(&self, q_p: &Vector3<f64>) -> Pose {
        PlatformModel::fk(q_p)
    }

    pub fn fk_arm(&self, q_m: &ArmConfig) -> Pose {
        self.arm.fk(q_m)
    }

    /// World end-effector pose.
    pub fn fk(&self, q: &Config) -> Pose {
        self.platform.base_pose(&q.platform) * self.arm.fk(&q.arm)
    }

    /// World frames of links 0..=6.
    pub fn link_frames(&self, q: &Config) -> [Pose; 7] {
        let base = self.platform.base_pose(&q.platform);
        let arm = self.arm.link_frames(&q.arm);
        let mut out = [Pose::identity(); 7];
        out[0] = PlatformModel::fk(&q.platform);
        for i in 0..6 {
            out[i + 1] = base * arm[i];
        }
        out
    }

    pub fn manipulability(&self, q: &Config) -> f64 {
        self.arm.manipulability(&q.arm)
    }

    /// Arm-only IK toward a world end-effector target with the platform
    /// held at `q_p`.
    pub fn ik_arm_world(
        &self,
        q_p: &Vector3<f64>,
        target: &Pose,
        seed: &ArmConfig,
        opts: &IkOptions,
    ) -> Option<ArmConfig> {
        let local = self.platform.base_pose(q_p).inverse() * *target;
        // quick reject on reach
        if (local.translation - self.arm.root()).norm() > self.arm.reach() + 1e-9 {
            return None;
        }
        self.arm.ik(&local, seed, opts)
    }

    pub fn validate(&self) -> Result<()> {
        self.arm.validate()?;
        for (i, c) in self.capsules.iter().enumerate() {
            if c.link > 6 {
                return Err(Error::InvalidModel(format!("capsule {i} refers to link {}", c.link)));
            }
            if !(c.shape.radius > 0.0) {
                return Err(Error::InvalidModel(format!("capsule {i} radius must be positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{alternating_arm, anthropomorphic_arm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pure_translation_arm() -> ArmModel {
        let joints = (0..6)
            .map(|i| Joint {
                offset: Pose::from_translation(0.1 * (i + 1) as f64, 0.0, 0.05),
                axis: if i % 2 == 0 { Vector3::z() } else { Vector3::y() },
            })
            .collect();
        ArmModel::new(joints, vec![[-PI, PI]; 6], Pose::from_translation(0.0, 0.0, 0.1)).unwrap()
    }

    /// Independent FK: explicit 4×4 homogeneous products.
    fn fk_oracle(arm: &ArmModel, q: &ArmConfig) -> nalgebra::Matrix4<f64> {
        let h = |p: &Pose| {
            let mut m = nalgebra::Matrix4::<f64>::identity();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&p.rotation);
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p.translation);
            m
        };
        let mut t = nalgebra::Matrix4::<f64>::identity();
        for (i, j) in arm.joints.iter().enumerate() {
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(j.axis), q[i]);
            t = t * h(&j.offset) * rot.to_homogeneous();
        }
        t * h(&arm.tool)
    }

    #[test]
    fn fk_zero_is_product_of_offsets() {
        let arm = pure_translation_arm();
        let ee = arm.fk(&ArmConfig::zeros());
        let expect = arm.joints.iter().fold(Pose::identity(), |acc, j| acc * j.offset) * arm.tool;
        assert!((ee.translation - expect.translation).norm() < 1e-15);
        assert_eq!(ee.rotation, nalgebra::Matrix3::identity());
    }

    #[test]
    fn single_joint_quarter_turn() {
        let offset = Pose::from_translation(0.0, 0.0, 0.2);
        let tool = Pose::from_translation(0.5, 0.0, 0.0);
        let mut joints = vec![Joint { offset, axis: Vector3::z() }];
        joints.extend((0..5).map(|_| Joint { offset: Pose::identity(), axis: Vector3::z() }));
        let arm = ArmModel::new(joints, vec![[-PI, PI]; 6], tool).unwrap();
        let mut q = ArmConfig::zeros();
        q[0] = PI / 2.0;
        let expect = offset * Pose::rot_z(PI / 2.0) * tool;
        let (dt, dr) = arm.fk(&q).distance(&expect);
        assert!(dt < 1e-15 && dr < 1e-15);
    }

    #[test]
    fn fk_matches_homogeneous_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for arm in [alternating_arm(), anthropomorphic_arm()] {
            for _ in 0..50 {
                let q = arm.random_config(&mut rng);
                let m = fk_oracle(&arm, &q);
                let ee = arm.fk(&q);
                assert!((ee.rotation - m.fixed_view::<3, 3>(0, 0)).abs().max() < 1e-12);
                assert!((ee.translation - m.fixed_view::<3, 1>(0, 3)).abs().max() < 1e-12);
            }
        }
    }

    #[test]
    fn platform_fk_examples() {
        assert_eq!(PlatformModel::fk(&Vector3::zeros()), Pose::identity());
        let p = PlatformModel::fk(&Vector3::new(1.0, 0.0, PI / 2.0));
        let mut expect = Pose::rot_z(PI / 2.0);
        expect.translation = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(p.distance(&expect), (0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let q = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-PI..PI));
            let (c, s) = (q.z.cos(), q.z.sin());
            let hand = Pose::new(
                nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
                Vector3::new(q.x, q.y, 0.0),
            );
            let (dt, dr) = PlatformModel::fk(&q).distance(&hand);
            assert!(dt < 1e-15 && dr < 1e-12);
        }
    }

    #[test]
    fn lever_arm_jacobian() {
        let mut joints = vec![Joint { offset: Pose::identity(), axis: Vector3::z() }];
        joints.extend((0..5).map(|_| Joint { offset: Pose::identity(), axis: Vector3::x() }));
        let l = 0.7;
        let arm = ArmModel::new(joints, vec![[-PI, PI]; 6], Pose::from_translation(l, 0.0, 0.0)).unwrap();
        let j = arm.jacobian(&ArmConfig::zeros());
        assert!((j.column(0) - Vector6::new(0.0, l, 0.0, 0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn coincident_axes_drop_rank() {
        // joints 4 and 6 share the forearm axis at the zero wrist pitch
        let arm = anthropomorphic_arm();
        let mut q = ArmConfig::new(0.2, -0.4, 0.9, 0.3, 0.0, -0.5);
        let j = arm.jacobian(&q);
        let sv = j.singular_values();
        assert!(sv.min() < 1e-12);
        assert!(arm.manipulability(&q) < 1e-9);
        q[4] = 0.6;
        assert!(arm.manipulability(&q) > 1e-3);
    }

    #[test]
    fn manipulability_invariant_to_platform() {
        let robot = crate::scenarios::desk_scale_robot("r", PlatformBounds::unbounded());
        let arm = ArmConfig::new(0.1, -0.5, 1.2, 0.4, 0.8, -0.2);
        let a = robot.manipulability(&Config::new(Vector3::zeros(), arm));
        let b = robot.manipulability(&Config::new(Vector3::new(3.0, -1.0, 2.0), arm));
        assert_eq!(a, b);
    }

    #[test]
    fn platform_translation_moves_ee_rigidly() {
        let robot = crate::scenarios::desk_scale_robot("r", PlatformBounds::unbounded());
        let arm = ArmConfig::new(0.1, -0.5, 1.2, 0.4, 0.8, -0.2);
        let a = robot.fk(&Config::new(Vector3::zeros(), arm));
        let b = robot.fk(&Config::new(Vector3::new(1.0, 2.0, 0.0), arm));
        assert!((b.translation - a.translation - Vector3::new(1.0, 2.0, 0.0)).norm() < 1e-15);
        assert_eq!(a.rotation, b.rotation);
        let base = robot.fk(&Config::new(Vector3::zeros(), ArmConfig::zeros()));
        let expect = robot.platform.mount * robot.arm.fk(&ArmConfig::zeros());
        assert!(base.distance(&expect).0 < 1e-15);
    }

    #[test]
    fn ik_zero_error_start_returns_seed() {
        let arm = anthropomorphic_arm();
        let seed = ArmConfig::new(0.1, -0.3, 1.0, 0.2, 0.7, 0.1);
        let q = arm.ik(&arm.fk(&seed), &seed, &IkOptions::default()).unwrap();
        assert_eq!(q, seed);
    }

    #[test]
    fn ik_unreachable_target() {
        let arm = anthropomorphic_arm();
        let target = Pose::from_translation(10.0, 0.0, 0.0);
        assert!(arm.ik(&target, &ArmConfig::zeros(), &IkOptions::default()).is_none());
    }

    #[test]
    fn ik_postcondition_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let arm = anthropomorphic_arm();
        let opts = IkOptions::default();
        for _ in 0..30 {
            let truth = arm.random_config(&mut rng);
            let seed = truth.map(|v| v + rng.gen_range(-0.05..0.05));
            if let Some(q) = arm.ik(&arm.fk(&truth), &seed, &opts) {
                let (dt, dr) = arm.fk(&q).distance(&arm.fk(&truth));
                assert!(dt <= opts.pos_tol && dr <= opts.rot_tol);
                assert!(arm.within_limits(&q));
            }
        }
    }

    fn fd_jacobian(arm: &ArmModel, q: &ArmConfig, h: f64) -> Jacobian {
        let mut jac = Jacobian::zeros();
        for i in 0..6 {
            let (mut qp, mut qm) = (*q, *q);
            qp[i] += h;
            qm[i] -= h;
            let (a, b) = (arm.fk(&qp), arm.fk(&qm));
            let lin = (a.translation - b.translation) / (2.0 * h);
            let ang = log_so3(&(a.rotation * b.rotation.transpose())) / (2.0 * h);
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&ang);
        }
        jac
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for arm in [alternating_arm(), anthropomorphic_arm()] {
            for _ in 0..100 {
                let q = arm.random_config(&mut rng);
                let err = (arm.jacobian(&q) - fd_jacobian(&arm, &q, 1e-6)).amax();
                assert!(err <= 1e-5, "{err}");
            }
        }
    }

    #[test]
    fn manipulability_matches_det_and_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for arm in [alternating_arm(), anthropomorphic_arm()] {
            for _ in 0..100 {
                let q = arm.random_config(&mut rng);
                let j = arm.jacobian(&q);
                let w = arm.manipulability(&q);
                let det = j.determinant().abs();
                let sv: f64 = j.singular_values().iter().product();
                assert!((w - det).abs() <= 1e-9 * det.max(1e-12), "{w} {det}");
                assert!((w - sv).abs() <= 1e-9 * sv.max(1e-12), "{w} {sv}");
            }
        }
    }

    #[test]
    fn ik_round_trip_from_perturbed_seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let opts = IkOptions::default();
        for arm in [alternating_arm(), anthropomorphic_arm()] {
            let mut ok = 0;
            for _ in 0..100 {
                let truth = arm.random_config(&mut rng);
                let seed = truth.map(|v| v + rng.gen_range(-0.05..0.05));
                if let Some(q) = arm.ik(&arm.fk(&truth), &seed, &opts) {
                    let (dt, dr) = arm.fk(&q).distance(&arm.fk(&truth));
                    if dt <= 1e-6 && dr <= 1e-6 {
                        ok += 1;
                    }
                }
            }
            assert!(ok >= 95, "{ok}/100");
        }
    }

    #[test]
    fn bounds_wrap_theta() {
        let b = PlatformBounds { x: [-1.0, 1.0], y: [-1.0, 1.0], theta: [3.0, 3.5] };
        assert!(b.contains(&Vector3::new(0.0, 0.0, 3.2)));
        assert!(b.contains(&Vector3::new(0.0, 0.0, 3.2 - TAU)));
        assert!(!b.contains(&Vector3::new(0.0, 0.0, 0.0)));
        let pinned = PlatformBounds::pinned(&Vector3::new(0.5, 0.5, 1.0));
        assert!(pinned.contains(&Vector3::new(0.5, 0.5, 1.0)));
        assert!(!pinned.contains(&Vector3::new(0.5, 0.51, 1.0)));
    }

    #[test]
    fn validation_rejects_bad_arms() {
        let mut arm = anthropomorphic_arm();
        arm.joints[2].axis = Vector3::new(0.0, 2.0, 0.0);
        assert!(arm.validate().is_err());
        let mut arm = anthropomorphic_arm();
        arm.limits[1] = [1.0, 1.0];
        assert!(arm.validate().is_err());
        let mut arm = anthropomorphic_arm();
        arm.joints.pop();
        assert!(arm.validate().is_err());
    }
}
