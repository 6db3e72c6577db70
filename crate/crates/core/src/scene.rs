//! World model and the collision-free predicate.
//!
//! Robot links, platform footprints and the carried object are all
//! approximated by capsules. Fixed obstacles may also be oriented boxes.

use nalgebra::Vector3;

use crate::geom::Pose;
use crate::model::{Config, RobotModel};

/// Segment `a`–`b` swept by a sphere of `radius`, in its owner's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapsuleShape {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl CapsuleShape {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Self { a, b, radius }
    }

    pub fn transformed(&self, pose: &Pose) -> CapsuleShape {
        CapsuleShape {
            a: pose.transform_point(&self.a),
            b: pose.transform_point(&self.b),
            radius: self.radius,
        }
    }
}

/// A capsule attached to link `link` of a robot (0 = platform).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCapsule {
    pub link: usize,
    pub shape: CapsuleShape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    Capsule(CapsuleShape),
    Box { pose: Pose, half_extents: Vector3<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    pub half_extents: Vector3<f64>,
    /// Collision capsules in the object frame.
    pub capsules: Vec<CapsuleShape>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotEntry {
    pub model: RobotModel,
    pub initial: Config,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub robots: Vec<RobotEntry>,
    pub object: ObjectModel,
    pub obstacles: Vec<Obstacle>,
    pub leader: usize,
    /// Minimum clearance between any checked pair (m).
    pub margin: f64,
    /// Gripper retreat distance used when releasing or approaching a grasp (m).
    pub approach_radius: f64,
}

/// Which grasp sites (object-frame end-effector poses) the gripper may
/// touch the object at.
#[derive(Debug, Clone, Copy)]
pub enum Exemption<'a> {
    None,
    Sites(&'a [Pose]),
}

pub const DEFAULT_MARGIN: f64 = 0.005;
pub const DEFAULT_APPROACH_RADIUS: f64 = 0.1;
/// Gripper–object exemption extends this many approach radii around a site.
pub const EXEMPTION_FACTOR: f64 = 1.2;

/// Gripper link index.
const GRIPPER_LINK: usize = 6;

/// Closest distance between segments `p1–q1` and `p2–q2`.
pub fn segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    const EPS: f64 = 1e-18;
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Surface distance between two posed capsules; negative on penetration.
pub fn capsule_distance(a: &CapsuleShape, b: &CapsuleShape) -> f64 {
    segment_distance(&a.a, &a.b, &b.a, &b.b) - a.radius - b.radius
}

/// Signed distance from a point to an oriented box surface.
pub fn box_sdf(pose: &Pose, half: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    local_box_sdf(half, &pose.inverse().transform_point(p))
}

fn local_box_sdf(half: &Vector3<f64>, local: &Vector3<f64>) -> f64 {
    let q = local.abs() - half;
    let outside = q.map(|v| v.max(0.0)).norm();
    let inside = q.max().min(0.0);
    outside + inside
}

/// Capsule to oriented box distance. The signed distance of a convex set is
/// convex, so its minimum along the segment is found by golden-section search.
pub fn capsule_box_distance(c: &CapsuleShape, pose: &Pose, half: &Vector3<f64>) -> f64 {
    let inv = pose.inverse();
    let (a, b) = (inv.transform_point(&c.a), inv.transform_point(&c.b));
    let f = |u: f64| local_box_sdf(half, &a.lerp(&b, u));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let best = f(0.0).min(f(1.0)).min(f1).min(f2);
    best - c.radius
}

fn obstacle_distance(c: &CapsuleShape, o: &Obstacle) -> f64 {
    match o {
        Obstacle::Capsule(s) => capsule_distance(c, s),
        Obstacle::Box { pose, half_extents } => capsule_box_distance(c, pose, half_extents),
    }
}

/// World capsules of one robot at `q`, tagged with their link index.
pub fn posed_capsules(robot: &RobotModel, q: &Config) -> Vec<(usize, CapsuleShape)> {
    let frames = robot.link_frames(q);
    robot
        .capsules
        .iter()
        .map(|c| (c.link, c.shape.transformed(&frames[c.link])))
        .collect()
}

impl Scene {
    pub fn robot(&self, i: usize) -> &RobotModel {
        &self.robots[i].model
    }

    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn object_capsules(&self, object_pose: &Pose) -> Vec<CapsuleShape> {
        self.object.capsules.iter().map(|c| c.transformed(object_pose)).collect()
    }

    /// Joint limits and platform workspace.
    pub fn within_limits(&self, robot: usize, q: &Config) -> bool {
        let m = self.robot(robot);
        m.arm.within_limits(&q.arm) && m.platform.bounds.contains(&q.platform)
    }

    /// Self-collision, excluding adjacent links.
    pub fn self_collision_free(&self, robot: usize, q: &Config) -> bool {
        let caps = posed_capsules(self.robot(robot), q);
        for (i, (li, ci)) in caps.iter().enumerate() {
            for (lj, cj) in &caps[i + 1..] {
                if li.abs_diff(*lj) < 2 {
                    continue;
                }
                if capsule_distance(ci, cj) < self.margin {
                    return false;
                }
            }
        }
        true
    }

    /// Robot against the object at `object_pose`. The gripper may touch the
    /// object while its end-effector lies near one of the exempt sites.
    pub fn object_collision_free(
        &self,
        robot: usize,
        q: &Config,
        object_pose: &Pose,
        exemption: Exemption<'_>,
    ) -> bool {
        let model = self.robot(robot);
        let gripper_exempt = match exemption {
            Exemption::None => false,
            Exemption::Sites(sites) => {
                let ee = model.fk(q).translation;
                let reach = EXEMPTION_FACTOR * self.approach_radius;
                sites
                    .iter()
                    .any(|s| (object_pose.compose(s).translation - ee).norm() <= reach)
            }
        };
        let obj = self.object_capsules(object_pose);
        for (link, c) in posed_capsules(model, q) {
            if link == GRIPPER_LINK && gripper_exempt {
                continue;
            }
            if obj.iter().any(|o| capsule_distance(&c, o) < self.margin) {
                return false;
            }
        }
        true
    }

    pub fn obstacle_free(&self, robot: usize, q: &Config) -> bool {
        if self.obstacles.is_empty() {
            return true;
        }
        posed_capsules(self.robot(robot), q).iter().all(|(_, c)| {
            self.obstacles.iter().all(|o| obstacle_distance(c, o) >= self.margin)
        })
    }

    /// Pairwise verdict between two posed robots.
    pub fn robots_collision_free(&self, i: usize, qi: &Config, j: usize, qj: &Config) -> bool {
        let a = posed_capsules(self.robot(i), qi);
        let b = posed_capsules(self.robot(j), qj);
        a.iter()
            .all(|(_, ca)| b.iter().all(|(_, cb)| capsule_distance(ca, cb) >= self.margin))
    }

    /// The full validity predicate for robot `robot` at `q`, with the object
    /// at `object_pose` and other robots posed as listed.
    pub fn in_cfree(
        &self,
        robot: usize,
        q: &Config,
        object_pose: &Pose,
        others: &[(usize, Config)],
        exemption: Exemption<'_>,
    ) -> bool {
        self.within_limits(robot, q)
            && self.self_collision_free(robot, q)
            && self.object_collision_free(robot, q, object_pose, exemption)
            && self.obstacle_free(robot, q)
            && others
                .iter()
                .filter(|(j, _)| *j != robot)
                .all(|(j, qj)| self.robots_collision_free(robot, q, *j, qj))
    }

    /// Smallest clearance of the robot to the object, ignoring exemptions.
    pub fn object_clearance(&self, robot: usize, q: &Config, object_pose: &Pose) -> f64 {
        let obj = self.object_capsules(object_pose);
        posed_capsules(self.robot(robot), q)
            .iter()
            .filter(|(l, _)| *l != GRIPPER_LINK)
            .flat_map(|(_, c)| obj.iter().map(move |o| capsule_distance(c, o)))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmConfig, PlatformBounds};
    use crate::scenarios::desk_scale_robot;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    /// Closest distance by sampling one segment finely and projecting onto
    /// the other.
    fn sampled_segment_distance(c1: &CapsuleShape, c2: &CapsuleShape, step: f64) -> f64 {
        let n = (1.0 / step).round() as usize;
        let d = c2.b - c2.a;
        let mut best = f64::INFINITY;
        for k in 0..=n {
            let p = c1.a.lerp(&c1.b, k as f64 / n as f64);
            let t = if d.norm_squared() > 0.0 {
                ((p - c2.a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            best = best.min((p - (c2.a + d * t)).norm());
        }
        best - c1.radius - c2.radius
    }

    #[test]
    fn parallel_capsules() {
        let a = CapsuleShape::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), 0.1);
        let b = CapsuleShape::new(v(0.0, 1.0, 0.0), v(1.0, 1.0, 0.0), 0.1);
        assert!((capsule_distance(&a, &b) - 0.8).abs() < 1e-15);
        assert!((capsule_distance(&a, &a) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn capsule_distance_vs_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rv = |rng: &mut ChaCha8Rng| v(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for _ in 0..200 {
            let a = CapsuleShape::new(rv(&mut rng), rv(&mut rng), rng.gen_range(0.01..0.2));
            let b = CapsuleShape::new(rv(&mut rng), rv(&mut rng), rng.gen_range(0.01..0.2));
            let exact = capsule_distance(&a, &b);
            let oracle = sampled_segment_distance(&a, &b, 1e-4);
            assert!((exact - oracle).abs() <= 1e-3, "{exact} vs {oracle}");
            assert!(exact <= oracle + 1e-12);
        }
    }

    #[test]
    fn box_distance_cases() {
        let pose = Pose::from_translation(0.0, 0.0, -0.5);
        let half = v(5.0, 5.0, 0.5);
        // horizontal capsule 0.2 above the floor surface
        let c = CapsuleShape::new(v(-1.0, 0.0, 0.3), v(1.0, 0.0, 0.3), 0.1);
        assert!((capsule_box_distance(&c, &pose, &half) - 0.2).abs() < 1e-9);
        // tilted capsule dipping into the box
        let c = CapsuleShape::new(v(0.0, 0.0, 0.5), v(0.5, 0.0, -0.1), 0.05);
        assert!((capsule_box_distance(&c, &pose, &half) + 0.15).abs() < 1e-9);
    }

    fn scene_with(robots: Vec<(Vector3<f64>, ArmConfig)>) -> Scene {
        Scene {
            robots: robots
                .into_iter()
                .enumerate()
                .map(|(i, (p, a))| RobotEntry {
                    model: desk_scale_robot(&format!("r{i}"), PlatformBounds::unbounded()),
                    initial: Config::new(p, a),
                })
                .collect(),
            object: ObjectModel { half_extents: v(0.1, 0.1, 0.1), capsules: vec![] },
            obstacles: vec![],
            leader: 0,
            margin: DEFAULT_MARGIN,
            approach_radius: DEFAULT_APPROACH_RADIUS,
        }
    }

    fn straight_out() -> ArmConfig {
        ArmConfig::new(0.0, 0.3, 0.6, 0.0, 0.6, 0.0)
    }

    #[test]
    fn lone_robot_is_free() {
        let s = scene_with(vec![(Vector3::zeros(), straight_out())]);
        let q = s.robots[0].initial;
        assert!(s.in_cfree(0, &q, &Pose::from_translation(5.0, 5.0, 5.0), &[], Exemption::None));
    }

    #[test]
    fn coincident_platforms_collide() {
        let s = scene_with(vec![(Vector3::zeros(), straight_out()), (Vector3::zeros(), straight_out())]);
        let q = s.robots[0].initial;
        let far = Pose::from_translation(5.0, 5.0, 5.0);
        assert!(!s.in_cfree(0, &q, &far, &[(1, q)], Exemption::None));
    }

    #[test]
    fn limits_are_part_of_cfree() {
        let s = scene_with(vec![(Vector3::zeros(), straight_out())]);
        let mut q = s.robots[0].initial;
        q.arm[1] = 10.0;
        assert!(!s.in_cfree(0, &q, &Pose::from_translation(5.0, 5.0, 5.0), &[], Exemption::None));
    }

    #[test]
    fn gripper_exemption_near_site_only() {
        let mut s = scene_with(vec![(Vector3::zeros(), straight_out())]);
        let q = s.robots[0].initial;
        let ee = s.robot(0).fk(&q);
        // object capsule right through the gripper tip
        s.object.capsules = vec![CapsuleShape::new(v(0.0, -0.05, 0.0), v(0.0, 0.05, 0.0), 0.02)];
        let obj = Pose::from_translation(ee.translation.x, ee.translation.y, ee.translation.z);
        let site = obj.inverse() * ee;
        assert!(!s.in_cfree(0, &q, &obj, &[], Exemption::None));
        assert!(s.in_cfree(0, &q, &obj, &[], Exemption::Sites(&[site])));
        let far_site = Pose::from_translation(1.0, 0.0, 0.0);
        assert!(!s.in_cfree(0, &q, &obj, &[], Exemption::Sites(&[far_site])));
    }

    /// Collision verdict from 5 mm point sampling of every segment pair.
    fn sampled_pair_clearance(a: &[(usize, CapsuleShape)], b: &[(usize, CapsuleShape)], skip_adjacent: bool) -> f64 {
        let pts = |c: &CapsuleShape| {
            let n = ((c.b - c.a).norm() / 0.005).ceil().max(1.0) as usize;
            (0..=n).map(move |k| c.a.lerp(&c.b, k as f64 / n as f64)).collect::<Vec<_>>()
        };
        let mut best = f64::INFINITY;
        for (i, (li, ci)) in a.iter().enumerate() {
            for (j, (lj, cj)) in b.iter().enumerate() {
                if skip_adjacent && (j <= i || li.abs_diff(*lj) < 2) {
                    continue;
                }
                let (pa, pb) = (pts(ci), pts(cj));
                let d = pa
                    .iter()
                    .flat_map(|p| pb.iter().map(move |r| (p - r).norm()))
                    .fold(f64::INFINITY, f64::min);
                best = best.min(d - ci.radius - cj.radius);
            }
        }
        best
    }

    #[test]
    fn cfree_matches_sampling_oracle() {
        let s = scene_with(vec![(Vector3::zeros(), straight_out()), (v(0.9, 0.0, 3.1), straight_out())]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let far = Pose::from_translation(50.0, 0.0, 0.0);
        let mut decided = 0;
        for _ in 0..150 {
            let q0 = Config::new(Vector3::zeros(), s.robot(0).arm.random_config(&mut rng));
            let q1 = Config::new(
                v(rng.gen_range(0.6..1.2), rng.gen_range(-0.3..0.3), rng.gen_range(-3.3..-2.9)),
                s.robot(1).arm.random_config(&mut rng),
            );
            let c0 = posed_capsules(s.robot(0), &q0);
            let c1 = posed_capsules(s.robot(1), &q1);
            let clearance = sampled_pair_clearance(&c0, &c0, true).min(sampled_pair_clearance(&c0, &c1, false));
            // sampling resolution band: the oracle cannot decide inside it
            if (clearance - s.margin).abs() < 0.005 {
                continue;
            }
            decided += 1;
            let verdict = s.in_cfree(0, &q0, &far, &[(1, q1)], Exemption::None);
            assert_eq!(verdict, clearance >= s.margin, "clearance {clearance}");
        }
        assert!(decided > 100);
    }

    proptest! {
        #[test]
        fn robot_pair_verdict_symmetric(seed in 0u64..10_000) {
            let s = scene_with(vec![(Vector3::zeros(), straight_out()), (v(0.8, 0.1, 3.0), straight_out())]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q0 = Config::new(Vector3::zeros(), s.robot(0).arm.random_config(&mut rng));
            let q1 = Config::new(v(rng.gen_range(0.5..1.1), rng.gen_range(-0.3..0.3), 3.0), s.robot(1).arm.random_config(&mut rng));
            prop_assert_eq!(s.robots_collision_free(0, &q0, 1, &q1), s.robots_collision_free(1, &q1, 0, &q0));
        }

        #[test]
        fn shrinking_radii_is_monotone(seed in 0u64..10_000, delta in 0.001f64..0.02) {
            let s = scene_with(vec![(Vector3::zeros(), straight_out()), (v(0.8, 0.1, 3.0), straight_out())]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q0 = Config::new(Vector3::zeros(), s.robot(0).arm.random_config(&mut rng));
            let q1 = Config::new(v(rng.gen_range(0.5..1.1), rng.gen_range(-0.3..0.3), 3.0), s.robot(1).arm.random_config(&mut rng));
            let far = Pose::from_translation(50.0, 0.0, 0.0);
            let before = s.in_cfree(0, &q0, &far, &[(1, q1)], Exemption::None);
            let mut shrunk = s.clone();
            for r in &mut shrunk.robots {
                for c in &mut r.model.capsules {
                    c.shape.radius = (c.shape.radius - delta).max(1e-4);
                }
            }
            let after = shrunk.in_cfree(0, &q0, &far, &[(1, q1)], Exemption::None);
            prop_assert!(!before || after);
        }
    }
}
