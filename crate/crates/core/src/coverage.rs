//! Object trajectory, grasp set, and the per-grasp feasibility sweep.
//!
//! For every robot and grasp, [`ik_check`] samples the trajectory parameter
//! and asks whether some configuration (platform sampled, arm solved by IK)
//! puts the end-effector on the grasp while staying collision-free. Runs of
//! feasible samples become the grasp's coverable set.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::model::{ArmConfig, Config, IkOptions, RobotModel};
use crate::scene::{Exemption, Scene};

/// Piecewise-geodesic object trajectory over `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTrajectory {
    waypoints: Vec<(f64, Pose)>,
}

impl ObjectTrajectory {
    pub fn new(waypoints: Vec<(f64, Pose)>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Precondition("trajectory needs at least two waypoints".into()));
        }
        if waypoints[0].0 != 0.0 || waypoints.last().unwrap().0 != 1.0 {
            return Err(Error::Precondition("waypoint parameters must start at 0 and end at 1".into()));
        }
        if waypoints.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::Precondition("waypoint parameters must be strictly increasing".into()));
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[(f64, Pose)] {
        &self.waypoints
    }

    /// World pose of the object at parameter `t`.
    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::ParameterOutOfRange { value: t });
        }
        let i = self
            .waypoints
            .windows(2)
            .position(|w| t <= w[1].0)
            .unwrap_or(self.waypoints.len() - 2);
        let (t0, a) = &self.waypoints[i];
        let (t1, b) = &self.waypoints[i + 1];
        if t == *t0 {
            return Ok(*a);
        }
        if t == *t1 {
            return Ok(*b);
        }
        a.interpolate(b, ((t - t0) / (t1 - t0)).clamp(0.0, 1.0))
    }

    /// End-effector target for grasp `g` at `t`.
    pub fn ee_target(&self, g: &Grasp, t: f64) -> Result<Pose> {
        Ok(self.pose_at(t)? * g.relative)
    }
}

/// A grasp: the end-effector pose in the object frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Grasp {
    pub id: String,
    pub relative: Pose,
}

/// Tolerance under which neighbouring intervals merge.
pub const MERGE_EPS: f64 = 1e-9;

/// Sorted, disjoint, non-adjacent closed subintervals of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamIntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl ParamIntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        Self { intervals: vec![(0.0, 1.0)] }
    }

    pub fn single(a: f64, b: f64) -> Self {
        Self::from_intervals([(a, b)])
    }

    /// Normalizes arbitrary intervals: clips to `[0, 1]`, drops reversed
    /// ones, sorts and merges overlapping or touching intervals.
    pub fn from_intervals<I: IntoIterator<Item = (f64, f64)>>(iter: I) -> Self {
        let mut v: Vec<(f64, f64)> = iter
            .into_iter()
            .map(|(a, b)| (a.max(0.0), b.min(1.0)))
            .filter(|(a, b)| a <= b)
            .collect();
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 + MERGE_EPS => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { intervals: out }
    }

    /// Runs of consecutive `true` samples on the uniform grid of `flags.len()`
    /// points.
    pub fn from_samples(flags: &[bool]) -> Self {
        let n = flags.len();
        let mut out = Vec::new();
        let mut start = None;
        for (k, f) in flags.iter().enumerate() {
            match (f, start) {
                (true, None) => start = Some(k),
                (false, Some(s)) => {
                    out.push((grid_t(s, n), grid_t(k - 1, n)));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((grid_t(s, n), grid_t(n - 1, n)));
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|(a, b)| *a <= t && t <= *b)
    }

    /// The interval containing `t`, if any.
    pub fn piece_at(&self, t: f64) -> Option<(f64, f64)> {
        self.intervals.iter().copied().find(|(a, b)| *a <= t && t <= *b)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_intervals(self.intervals.iter().chain(&other.intervals).copied())
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a1, b1) = self.intervals[i];
            let (a2, b2) = other.intervals[j];
            let (lo, hi) = (a1.max(a2), b1.min(b2));
            if lo <= hi {
                out.push((lo, hi));
            }
            if b1 < b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::from_intervals(out)
    }

    /// Closure of `[0, 1]` minus the set: the boundary points are kept so
    /// the result stays a family of closed intervals.
    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        let mut first = true;
        for &(a, b) in &self.intervals {
            if a > cursor + MERGE_EPS || (first && a > 0.0) {
                out.push((cursor, a));
            }
            cursor = b;
            first = false;
        }
        if self.intervals.is_empty() {
            return Self::full();
        }
        if cursor < 1.0 - MERGE_EPS {
            out.push((cursor, 1.0));
        }
        Self { intervals: out }
    }

    /// True when the set contains `[a, b]`.
    pub fn covers(&self, a: f64, b: f64) -> bool {
        self.intervals
            .iter()
            .any(|(lo, hi)| *lo <= a + MERGE_EPS && *hi >= b - MERGE_EPS)
    }

    pub fn covers_unit(&self) -> bool {
        self.covers(0.0, 1.0)
    }

    /// Parts of `[0, 1]` not covered by the set.
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        if self.covers_unit() {
            return Vec::new();
        }
        self.complement().intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// Parameter of grid sample `k` out of `n`.
pub fn grid_t(k: usize, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    k as f64 / (n - 1) as f64
}

/// Nearest grid index to `t`.
pub fn grid_index(t: f64, n: usize) -> usize {
    ((t * (n - 1) as f64).round() as usize).min(n - 1)
}

/// Platform poses arranged on a polar grid around an end-effector target,
/// each facing the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformSampler {
    pub headings: usize,
    pub radii: usize,
}

impl Default for PlatformSampler {
    fn default() -> Self {
        Self { headings: 24, radii: 6 }
    }
}

impl PlatformSampler {
    /// Candidate platform poses for `target`, restricted to the robot's
    /// workspace bounds and ordered by distance from `near`.
    pub fn candidates(&self, robot: &RobotModel, target: &Pose, near: &Vector3<f64>) -> Vec<Vector3<f64>> {
        let mount = robot.platform.mount;
        let root_in_platform = mount.transform_point(&robot.arm.root());
        let mount_yaw = mount.rotation[(1, 0)].atan2(mount.rotation[(0, 0)]);
        let reach = robot.arm.reach();
        let dz = target.translation.z - root_in_platform.z;
        if dz.abs() >= reach {
            return Vec::new();
        }
        let r_max = 0.95 * (reach * reach - dz * dz).sqrt();
        let r_min = 0.25 * r_max;
        let mut out = Vec::with_capacity(self.headings * self.radii);
        for ri in 0..self.radii {
            let r = if self.radii == 1 {
                0.5 * (r_min + r_max)
            } else {
                r_min + (r_max - r_min) * ri as f64 / (self.radii - 1) as f64
            };
            for hi in 0..self.headings {
                let phi = TAU * hi as f64 / self.headings as f64;
                let root_xy = Vector3::new(
                    target.translation.x + r * phi.cos(),
                    target.translation.y + r * phi.sin(),
                    0.0,
                );
                let theta = crate::model::wrap_angle(phi + std::f64::consts::PI - mount_yaw);
                let (c, s) = (theta.cos(), theta.sin());
                let off = Vector3::new(
                    c * root_in_platform.x - s * root_in_platform.y,
                    s * root_in_platform.x + c * root_in_platform.y,
                    0.0,
                );
                let q_p = Vector3::new(root_xy.x - off.x, root_xy.y - off.y, theta);
                if robot.platform.bounds.contains(&q_p) {
                    out.push(q_p);
                }
            }
        }
        let key = |q: &Vector3<f64>| {
            (q.xy() - near.xy()).norm() + 0.2 * crate::model::wrap_angle(q.z - near.z).abs()
        };
        // stable sort keeps grid order on ties
        out.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageOptions {
    /// Number of trajectory samples.
    pub resolution: usize,
    pub seed: u64,
    /// IK seeds per platform candidate: the robot's initial arm plus
    /// `ik_seeds - 1` uniform random configurations.
    pub ik_seeds: usize,
    pub sampler: PlatformSampler,
    pub ik: IkOptions,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self {
            resolution: 201,
            seed: 0,
            ik_seeds: 8,
            sampler: PlatformSampler::default(),
            ik: IkOptions::default(),
        }
    }
}

/// Per-grasp coverage of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotCoverage {
    pub robot: usize,
    /// Grasp ids in grasp-set order with their coverable sets.
    pub per_grasp: Vec<(String, ParamIntervalSet)>,
    pub union: ParamIntervalSet,
    /// One feasibility witness per sample and grasp (same order as
    /// `per_grasp`).
    pub witnesses: Vec<Vec<Option<Config>>>,
}

impl RobotCoverage {
    pub fn set(&self, grasp: &str) -> Option<&ParamIntervalSet> {
        self.per_grasp.iter().find(|(g, _)| g == grasp).map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub resolution: usize,
    pub robots: Vec<RobotCoverage>,
}

impl Coverage {
    pub fn covers_all(&self) -> bool {
        self.robots.iter().all(|r| r.union.covers_unit())
    }

    /// First robot with a hole in its coverage, with the holes.
    pub fn first_gap(&self) -> Option<(usize, Vec<(f64, f64)>)> {
        self.robots
            .iter()
            .find(|r| !r.union.covers_unit())
            .map(|r| (r.robot, r.union.gaps()))
    }
}

/// Deterministic RNG seed for a query that depends only on its inputs, so a
/// sample's verdict does not depend on the grid it was evaluated on.
pub(crate) fn query_seed(seed: u64, a: u64, b: u64, t: f64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ t.to_bits();
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Searches for a collision-free configuration of `robot` whose
/// end-effector sits at `target`. The robot's current platform is tried
/// first, then the sampler's candidates.
#[allow(clippy::too_many_arguments)]
pub fn find_config(
    scene: &Scene,
    robot: usize,
    target: &Pose,
    object_pose: &Pose,
    site: &Pose,
    current: &Config,
    opts: &CoverageOptions,
    rng_seed: u64,
) -> Option<Config> {
    let model = scene.robot(robot);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut platforms = vec![current.platform];
    if !model.platform.bounds.is_pinned() {
        platforms.extend(opts.sampler.candidates(model, target, &current.platform));
    }
    let sites = [*site];
    for q_p in platforms {
        if !model.platform.bounds.contains(&q_p) {
            continue;
        }
        // fresh random seeds per platform candidate
        let mut seeds: Vec<ArmConfig> = vec![current.arm];
        seeds.extend((1..opts.ik_seeds.max(1)).map(|_| model.arm.random_config(&mut rng)));
        for seed in &seeds {
            if let Some(arm) = model.ik_arm_world(&q_p, target, seed, &opts.ik) {
                let q = Config::new(q_p, arm);
                if scene.in_cfree(robot, &q, object_pose, &[], Exemption::Sites(&sites)) {
                    return Some(q);
                }
            }
        }
    }
    None
}

/// Feasibility sweep for one robot over every grasp. Other robots are
/// ignored here; inter-robot collisions are caught after assignment.
pub fn ik_check(
    scene: &Scene,
    robot: usize,
    traj: &ObjectTrajectory,
    grasps: &[Grasp],
    opts: &CoverageOptions,
) -> Result<RobotCoverage> {
    if opts.resolution < 2 {
        return Err(Error::Precondition("coverage resolution must be at least 2".into()));
    }
    let n = opts.resolution;
    let initial = scene.robots[robot].initial;
    let mut per_grasp = Vec::with_capacity(grasps.len());
    let mut witnesses = Vec::with_capacity(grasps.len());
    let mut union = ParamIntervalSet::empty();
    for (gi, g) in grasps.iter().enumerate() {
        let mut flags = vec![false; n];
        let mut wit = vec![None; n];
        for k in 0..n {
            let t = grid_t(k, n);
            let obj = traj.pose_at(t)?;
            let target = obj * g.relative;
            let s = query_seed(opts.seed, robot as u64, gi as u64, t);
            if let Some(q) = find_config(scene, robot, &target, &obj, &g.relative, &initial, opts, s) {
                flags[k] = true;
                wit[k] = Some(q);
            }
        }
        let set = ParamIntervalSet::from_samples(&flags);
        union = union.union(&set);
        per_grasp.push((g.id.clone(), set));
        witnesses.push(wit);
    }
    Ok(RobotCoverage {
        robot,
        per_grasp,
        union,
        witnesses,
    })
}

/// [`ik_check`] for every robot in the scene.
pub fn ik_check_all(
    scene: &Scene,
    traj: &ObjectTrajectory,
    grasps: &[Grasp],
    opts: &CoverageOptions,
) -> Result<Coverage> {
    let robots = (0..scene.n_robots())
        .map(|i| ik_check(scene, i, traj, grasps, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(Coverage {
        resolution: opts.resolution,
        robots,
    })
}
