//! Reference robots and the bundled regression scenarios.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::coverage::{Grasp, ObjectTrajectory};
use crate::geom::Pose;
use crate::model::{ArmConfig, ArmModel, Config, Joint, PlatformBounds, PlatformModel, RobotModel};
use crate::scene::{
    CapsuleShape, LinkCapsule, ObjectModel, Obstacle, RobotEntry, Scene, DEFAULT_APPROACH_RADIUS, DEFAULT_MARGIN,
};

fn deg(v: f64) -> f64 {
    v.to_radians()
}

fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

/// 6R chain with alternating z/y axes and 0.3 m links.
pub fn alternating_arm() -> ArmModel {
    let joints = (0..6)
        .map(|i| Joint {
            offset: if i == 0 { Pose::identity() } else { Pose::from_translation(0.0, 0.0, 0.3) },
            axis: if i % 2 == 0 { Vector3::z() } else { Vector3::y() },
        })
        .collect();
    ArmModel::new(joints, vec![[deg(-170.0), deg(170.0)]; 6], Pose::from_translation(0.0, 0.0, 0.1))
        .expect("valid preset")
}

/// Anthropomorphic 6R arm: base yaw, shoulder and elbow pitch, spherical
/// wrist. Upper arm and forearm are 0.3 m; the tool adds 0.1 m along the
/// approach axis (tool z).
pub fn anthropomorphic_arm() -> ArmModel {
    let j = |x: f64, z: f64, axis: Vector3<f64>| Joint {
        offset: Pose::from_translation(x, 0.0, z),
        axis,
    };
    let joints = vec![
        j(0.0, 0.1, Vector3::z()),
        j(0.0, 0.2, Vector3::y()),
        j(0.0, 0.3, Vector3::y()),
        j(0.15, 0.0, Vector3::x()),
        j(0.15, 0.0, Vector3::y()),
        j(0.0, 0.0, Vector3::x()),
    ];
    let limits = vec![
        [deg(-360.0), deg(360.0)],
        [deg(-120.0), deg(120.0)],
        [deg(-150.0), deg(150.0)],
        [deg(-360.0), deg(360.0)],
        [deg(-125.0), deg(125.0)],
        [deg(-360.0), deg(360.0)],
    ];
    let mut tool = Pose::rot_y(PI / 2.0);
    tool.translation = v(0.1, 0.0, 0.0);
    ArmModel::new(joints, limits, tool).expect("valid preset")
}

/// Collision capsules for [`anthropomorphic_arm`] on the reference platform.
pub fn desk_scale_capsules() -> Vec<LinkCapsule> {
    let c = |link: usize, a: Vector3<f64>, b: Vector3<f64>, radius: f64| LinkCapsule {
        link,
        shape: CapsuleShape::new(a, b, radius),
    };
    vec![
        c(0, v(-0.15, 0.0, 0.18), v(0.15, 0.0, 0.18), 0.18),
        c(1, v(0.0, 0.0, -0.05), v(0.0, 0.0, 0.15), 0.06),
        c(2, v(0.0, 0.0, 0.05), v(0.0, 0.0, 0.25), 0.05),
        c(3, v(0.06, 0.0, 0.0), v(0.15, 0.0, 0.0), 0.045),
        c(4, v(0.0, 0.0, 0.0), v(0.07, 0.0, 0.0), 0.04),
        c(6, v(0.06, 0.0, 0.0), v(0.1, 0.0, 0.0), 0.03),
    ]
}

/// Omnidirectional platform (0.66 × 0.36 m footprint, 0.36 m tall) with the
/// anthropomorphic arm mounted 0.1 m ahead of its centre.
pub fn desk_scale_robot(name: &str, bounds: PlatformBounds) -> RobotModel {
    RobotModel {
        name: name.to_string(),
        platform: PlatformModel {
            mount: Pose::from_translation(0.1, 0.0, 0.36),
            bounds,
        },
        arm: anthropomorphic_arm(),
        capsules: desk_scale_capsules(),
    }
}

/// Expected outcome of a bundled scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expectation {
    pub must_succeed: bool,
    pub max_regrasps: usize,
    pub platform_motion_allowed: bool,
}

/// A complete planning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub scene: Scene,
    pub trajectory: ObjectTrajectory,
    pub grasps: Vec<Grasp>,
    pub expect: Expectation,
}

/// End-effector pose at `point` whose approach axis (tool z) is `approach`
/// and whose tool x axis lies as close as possible to `hint`.
pub fn grasp_pose(point: Vector3<f64>, approach: Vector3<f64>, hint: Vector3<f64>) -> Pose {
    let z = approach.normalize();
    let x = (hint - z * hint.dot(&z)).normalize();
    let y = z.cross(&x);
    Pose::new(Matrix3::from_columns(&[x, y, z]), point)
}

fn grasp(id: &str, point: Vector3<f64>, approach: Vector3<f64>, hint: Vector3<f64>) -> Grasp {
    Grasp {
        id: id.to_string(),
        relative: grasp_pose(point, approach, hint),
    }
}

fn floor() -> Obstacle {
    Obstacle::Box {
        pose: Pose::from_translation(0.0, 0.0, -0.06),
        half_extents: v(20.0, 20.0, 0.05),
    }
}

fn entry(name: &str, platform: Vector3<f64>, bounds: PlatformBounds, arm: ArmConfig) -> RobotEntry {
    RobotEntry {
        model: desk_scale_robot(name, bounds),
        initial: Config::new(platform, arm),
    }
}

fn bounds(x: [f64; 2], y: [f64; 2]) -> PlatformBounds {
    PlatformBounds { x, y, theta: [-PI, PI] }
}

fn pose_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Pose {
    Pose::from_xyz_rpy_deg(xyz, rpy)
}

/// Arm posture with the hand forward at about shoulder height.
pub fn ready_arm() -> ArmConfig {
    ArmConfig::new(0.0, 0.4, 0.6, 0.0, 0.6, 0.0)
}

const CHAIR_HALF: f64 = 0.25;
const CHAIR_HEIGHT: f64 = 0.8;

/// Two robots turning a chair-sized block from (90, 0, 0)° to
/// (−180, 45, 90)° about a fixed centre. With platforms free each robot
/// keeps its grasp by repositioning; with `platform_motion = false` the
/// platforms are pinned to their start poses.
pub fn chair(platform_motion: bool) -> Problem {
    let h = CHAIR_HALF;
    let c = [0.0, 0.0, CHAIR_HEIGHT];
    let trajectory = ObjectTrajectory::new(vec![
        (0.0, pose_rpy(c, [90.0, 0.0, 0.0])),
        (1.0, pose_rpy(c, [-180.0, 45.0, 90.0])),
    ])
    .expect("valid trajectory");
    let z = Vector3::z();
    let grasps = vec![
        grasp("px", v(h, 0.0, 0.0), v(-1.0, 0.0, 0.0), z),
        grasp("nx", v(-h, 0.0, 0.0), v(1.0, 0.0, 0.0), z),
        grasp("pz", v(0.0, 0.0, h), v(0.0, 0.0, -1.0), Vector3::x()),
        grasp("nz", v(0.0, 0.0, -h), v(0.0, 0.0, 1.0), Vector3::x()),
    ];
    let p0 = v(-1.0, 0.0, 0.0);
    let p1 = v(1.0, 0.0, PI);
    let (b0, b1) = if platform_motion {
        (bounds([-2.5, -0.3], [-2.0, 2.0]), bounds([0.3, 2.5], [-2.0, 2.0]))
    } else {
        (PlatformBounds::pinned(&p0), PlatformBounds::pinned(&p1))
    };
    let r = h - 0.05;
    let object = ObjectModel {
        half_extents: Vector3::repeat(h),
        capsules: vec![
            CapsuleShape::new(v(-0.05, 0.0, 0.0), v(0.05, 0.0, 0.0), r),
            CapsuleShape::new(v(0.0, -0.05, 0.0), v(0.0, 0.05, 0.0), r),
            CapsuleShape::new(v(0.0, 0.0, -0.05), v(0.0, 0.0, 0.05), r),
        ],
    };
    Problem {
        name: if platform_motion { "chair" } else { "chair-clamped" }.into(),
        scene: Scene {
            robots: vec![entry("left", p0, b0, ready_arm()), entry("right", p1, b1, ready_arm())],
            object,
            obstacles: vec![floor()],
            leader: 0,
            margin: DEFAULT_MARGIN,
            approach_radius: DEFAULT_APPROACH_RADIUS,
        },
        trajectory,
        grasps,
        expect: Expectation {
            must_succeed: platform_motion,
            max_regrasps: if platform_motion { 0 } else { usize::MAX },
            platform_motion_allowed: platform_motion,
        },
    }
}

pub const DESK_HIGH: f64 = 1.1;
pub const DESK_LOW: f64 = 0.6;

/// Three robots flipping a 1.2 × 0.6 m board about its long axis at centre
/// height `height`. Two robots hold the short ends; the third starts on the
/// near long edge, which swings down and under the board. With
/// `pass_under` the third robot's workspace reaches past the far edge, as
/// if there were room to drive beneath the board.
pub fn desk_at(height: f64, pass_under: bool) -> Problem {
    let w = 0.3;
    let c = [0.0, 0.0, height];
    let trajectory = ObjectTrajectory::new(vec![
        (0.0, pose_rpy(c, [0.0, 0.0, 0.0])),
        (0.5, pose_rpy(c, [90.0, 0.0, 0.0])),
        (1.0, pose_rpy(c, [180.0, 0.0, 0.0])),
    ])
    .expect("valid trajectory");
    let z = Vector3::z();
    let grasps = vec![
        grasp("end-left", v(-0.6, 0.0, 0.0), v(1.0, 0.0, 0.0), z),
        grasp("end-right", v(0.6, 0.0, 0.0), v(-1.0, 0.0, 0.0), z),
        grasp("edge-near", v(0.0, -w, 0.0), v(0.0, 1.0, -1.0), Vector3::x()),
        grasp("edge-far", v(0.0, w, 0.0), v(0.0, -1.0, -1.0), Vector3::x()),
    ];
    let capsules = [-1.0, -0.5, 0.0, 0.5, 1.0]
        .iter()
        .map(|&f| f * (w - 0.05))
        .map(|y| CapsuleShape::new(v(-0.55, y, 0.0), v(0.55, y, 0.0), 0.05))
        .collect();
    let side = if pass_under {
        bounds([-0.95, 0.95], [-2.0, 2.0])
    } else {
        bounds([-0.5, 0.5], [-2.0, -0.3])
    };
    let robots = vec![
        entry("end-left", v(-1.35, 0.0, 0.0), bounds([-2.5, -1.0], [-1.0, 1.0]), ready_arm()),
        entry("end-right", v(1.35, 0.0, PI), bounds([1.0, 2.5], [-1.0, 1.0]), ready_arm()),
        entry("side", v(0.0, -0.7, PI / 2.0), side, ready_arm()),
    ];
    Problem {
        name: format!("desk-{height}"),
        scene: Scene {
            robots,
            object: ObjectModel {
                half_extents: v(0.6, w, 0.02),
                capsules,
            },
            obstacles: vec![floor()],
            leader: 0,
            margin: DEFAULT_MARGIN,
            approach_radius: DEFAULT_APPROACH_RADIUS,
        },
        trajectory,
        grasps,
        expect: Expectation {
            must_succeed: true,
            max_regrasps: 1,
            platform_motion_allowed: true,
        },
    }
}

/// Board carried high enough for the side robot to drive underneath.
pub fn desk_high() -> Problem {
    let mut p = desk_at(DESK_HIGH, true);
    p.name = "desk-high".into();
    p.expect.max_regrasps = 0;
    p
}

/// Board lowered so the side robot's first grasp is lost mid-flip.
pub fn desk_low() -> Problem {
    let mut p = desk_at(DESK_LOW, false);
    p.name = "desk-low".into();
    p
}

/// The chair problem with the block lifted out of reach halfway through.
pub fn unreachable() -> Problem {
    let mut p = chair(true);
    let c = [0.0, 0.0, CHAIR_HEIGHT];
    p.trajectory = ObjectTrajectory::new(vec![
        (0.0, pose_rpy(c, [90.0, 0.0, 0.0])),
        (0.5, pose_rpy([0.0, 0.0, 4.0], [90.0, 0.0, 0.0])),
        (1.0, pose_rpy(c, [90.0, 0.0, 0.0])),
    ])
    .expect("valid trajectory");
    p.name = "unreachable".into();
    p.expect = Expectation {
        must_succeed: false,
        max_regrasps: 0,
        platform_motion_allowed: true,
    };
    p
}

/// Every bundled problem by name.
pub fn by_name(name: &str) -> Option<Problem> {
    Some(match name {
        "chair" => chair(true),
        "chair-clamped" => chair(false),
        "desk-high" => desk_high(),
        "desk-low" => desk_low(),
        "unreachable" => unreachable(),
        _ => return None,
    })
}

pub const NAMES: [&str; 5] = ["chair", "chair-clamped", "desk-high", "desk-low", "unreachable"];
