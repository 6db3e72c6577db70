//! Coordinated-platform planning, regrasp planning and the global planner.
//!
//! Plans are sampled on the coverage grid: `t_k = k / (N - 1)`. All robots
//! share one step sequence. A regrasp freezes the object at its grid
//! parameter and inserts extra steps in which only the regrasping robot
//! moves.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assign::{Assignment, AssignmentSearch, RobotSets};
use crate::coverage::{grid_index, grid_t, ik_check_all, query_seed, Coverage, CoverageOptions, Grasp, ObjectTrajectory};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::model::{wrap_angle, ArmConfig, Config};
use crate::scene::{Exemption, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// Arm tracks the grasp with the platform still.
    Track,
    /// Platform and arm move together, grasp unchanged.
    PlatformTransit,
    /// Grasp released; free motion toward the next grasp.
    RegraspFree,
    /// Configuration frozen while another robot regrasps.
    Hold,
}

impl Event {
    pub fn as_str(&self) -> &'static str {
        match self {
            Event::Track => "track",
            Event::PlatformTransit => "platform_transit",
            Event::RegraspFree => "regrasp_free",
            Event::Hold => "hold",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "track" => Event::Track,
            "platform_transit" => Event::PlatformTransit,
            "regrasp_free" => Event::RegraspFree,
            "hold" => Event::Hold,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub config: Config,
    pub grasp: Option<String>,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotTrajectory {
    pub robot: usize,
    pub knots: Vec<Knot>,
    pub xi: f64,
}

impl RobotTrajectory {
    pub fn transits(&self) -> usize {
        self.knots
            .windows(2)
            .filter(|w| w[1].event == Event::PlatformTransit && w[0].event != Event::PlatformTransit)
            .count()
    }
}

/// A regrasp pause in the shared step sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Pause {
    pub robot: usize,
    pub t: f64,
    /// First and last step of the pause (inclusive).
    pub steps: (usize, usize),
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Rank of the assignment that produced the plan.
    pub assignment_rank: usize,
    /// One entry per rejected assignment.
    pub failures: Vec<String>,
    pub transits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiRobotPlan {
    pub robots: Vec<RobotTrajectory>,
    pub pauses: Vec<Pause>,
    pub assignment: Assignment,
    pub diagnostics: Diagnostics,
}

impl MultiRobotPlan {
    pub fn steps(&self) -> usize {
        self.robots.first().map_or(0, |r| r.knots.len())
    }

    pub fn regrasp_count(&self) -> usize {
        self.pauses.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub coverage: CoverageOptions,
    /// Overlap between the stalled and the replanned arm trajectory,
    /// in trajectory-parameter units.
    pub xi: f64,
    pub max_alternatives: usize,
    pub manipulability_floor: f64,
    /// Largest joint change between consecutive knots (rad).
    pub joint_step: f64,
    /// Largest platform translation between consecutive knots (m).
    pub platform_step: f64,
    /// Largest platform rotation between consecutive knots (rad).
    pub platform_turn: f64,
    pub max_transits: usize,
    /// Regrasp target candidates tried before giving up.
    pub regrasp_targets: usize,
    /// Tracking tolerance used by [`trajectory_check`] (m and rad).
    pub track_tol: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            coverage: CoverageOptions::default(),
            xi: 0.05,
            max_alternatives: 8,
            manipulability_floor: 1e-3,
            joint_step: 0.3,
            platform_step: 0.2,
            platform_turn: 0.4,
            max_transits: 12,
            regrasp_targets: 6,
            track_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Arm-only continuation result: `configs[j]` sits at grid index
/// `start ± j`; `reached` is the last feasible index.
#[derive(Debug, Clone, PartialEq)]
pub struct Partial {
    pub start: usize,
    pub configs: Vec<Config>,
    pub reached: usize,
    pub stall: Option<&'static str>,
}

/// Platform transit found by [`Planner::connect_plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transit {
    /// Grid index where the platform starts moving.
    pub start: usize,
    /// Configurations at `start..=end`.
    pub configs: Vec<Config>,
    pub end: usize,
    pub platform: Vector3<f64>,
    /// Last index the arm reaches from the new platform before stalling.
    pub lookahead: usize,
}

/// Planned configurations for one grasp segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPlan {
    /// Grid index of `configs[0]`.
    pub start: usize,
    pub configs: Vec<Config>,
    pub events: Vec<Event>,
    pub transits: usize,
}

/// Violation kinds found by [`trajectory_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Tracking,
    ClosedChain,
    Collision,
    Step,
    PlatformMotion,
    HoldMotion,
    Structure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub robot: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub pass: bool,
    pub violations: Vec<Violation>,
    /// Largest tracking error over grasped knots (m, rad).
    pub max_tracking: (f64, f64),
    /// Largest relative end-effector drift between regrasps (m, rad).
    pub max_drift: (f64, f64),
}

/// Planning context shared by all planners.
pub struct Planner<'a> {
    pub scene: &'a Scene,
    pub traj: &'a ObjectTrajectory,
    pub grasps: &'a [Grasp],
    pub opts: PlanOptions,
    /// Robots already planned, with their configuration at every grid
    /// index; tracking avoids them.
    pub fixed: Vec<(usize, Vec<Config>)>,
}

impl<'a> Planner<'a> {
    pub fn new(scene: &'a Scene, traj: &'a ObjectTrajectory, grasps: &'a [Grasp], opts: PlanOptions) -> Self {
        Self {
            scene,
            traj,
            grasps,
            opts,
            fixed: Vec::new(),
        }
    }

    fn n(&self) -> usize {
        self.opts.coverage.resolution
    }

    fn t(&self, k: usize) -> f64 {
        grid_t(k, self.n())
    }

    fn object(&self, k: usize) -> Pose {
        self.traj.pose_at(self.t(k)).expect("grid parameter in range")
    }

    pub fn grasp(&self, id: &str) -> Result<&'a Grasp> {
        self.grasps
            .iter()
            .find(|g| g.id == id)
            .ok_or_else(|| Error::Precondition(format!("unknown grasp '{id}'")))
    }

    fn grasp_index(&self, id: &str) -> u64 {
        self.grasps.iter().position(|g| g.id == id).unwrap_or(0) as u64
    }

    fn sites(&self) -> Vec<Pose> {
        self.grasps.iter().map(|g| g.relative).collect()
    }

    fn step_ok(&self, a: &Config, b: &Config) -> bool {
        (a.arm - b.arm).amax() <= self.opts.joint_step
            && (a.platform.xy() - b.platform.xy()).norm() <= self.opts.platform_step
            && wrap_angle(a.platform.z - b.platform.z).abs() <= self.opts.platform_turn
    }

    /// Why `q` cannot hold grasp `g` at grid index `k`, if it cannot.
    fn track_fault(&self, robot: usize, k: usize, g: &Grasp, q: &Config, prev: Option<&Config>) -> Option<&'static str> {
        let model = self.scene.robot(robot);
        if !self.scene.within_limits(robot, q) {
            return Some("limits");
        }
        if let Some(p) = prev {
            if !self.step_ok(p, q) {
                return Some("joint step");
            }
        }
        if model.manipulability(q) < self.opts.manipulability_floor {
            return Some("manipulability");
        }
        let obj = self.object(k);
        let (dt, dr) = model.fk(q).distance(&(obj * g.relative));
        if dt > self.opts.track_tol || dr > self.opts.track_tol {
            return Some("tracking");
        }
        let site = [g.relative];
        let others: Vec<(usize, Config)> = self.fixed.iter().map(|(j, c)| (*j, c[k])).collect();
        if !self.scene.in_cfree(robot, q, &obj, &others, Exemption::Sites(&site)) {
            return Some("collision");
        }
        None
    }

    fn track_ik(&self, robot: usize, k: usize, g: &Grasp, platform: &Vector3<f64>, seed: &ArmConfig) -> Option<Config> {
        let target = self.object(k) * g.relative;
        self.scene
            .robot(robot)
            .ik_arm_world(platform, &target, seed, &self.opts.coverage.ik)
            .map(|arm| Config::new(*platform, arm))
    }

    /// Arm-only continuation with the platform frozen, from grid index
    /// `start` toward `stop`.
    pub fn plan_manipulator(
        &self,
        robot: usize,
        g: &Grasp,
        start: usize,
        q0: &Config,
        stop: usize,
        direction: Direction,
    ) -> Partial {
        let mut out = Partial {
            start,
            configs: Vec::new(),
            reached: start,
            stall: None,
        };
        if let Some(f) = self.track_fault(robot, start, g, q0, None) {
            out.stall = Some(f);
            return out;
        }
        out.configs.push(*q0);
        let mut k = start;
        let mut prev = *q0;
        loop {
            let next = match direction {
                Direction::Forward if k < stop => k + 1,
                Direction::Backward if k > stop => k - 1,
                _ => break,
            };
            let Some(q) = self.track_ik(robot, next, g, &prev.platform, &prev.arm) else {
                out.stall = Some("ik");
                break;
            };
            if let Some(f) = self.track_fault(robot, next, g, &q, Some(&prev)) {
                out.stall = Some(f);
                break;
            }
            out.configs.push(q);
            prev = q;
            k = next;
        }
        out.reached = k;
        out
    }

    fn window_steps(&self) -> usize {
        ((self.opts.xi * (self.n() - 1) as f64).round() as usize).max(1)
    }

    /// Finds a new platform pose that lets the arm continue past the stall
    /// at `beta`, and the transit that takes the platform there.
    ///
    /// `history[j]` is the configuration at grid index `lo + j` for
    /// `lo..=beta`; the transit window never starts before `lo`.
    pub fn connect_plan(
        &self,
        robot: usize,
        g: &Grasp,
        lo: usize,
        history: &[Config],
        beta: usize,
        seg_end: usize,
    ) -> Result<Transit> {
        if !(self.opts.xi > 0.0) {
            return Err(Error::Precondition("overlap xi must be positive".into()));
        }
        let model = self.scene.robot(robot);
        let w0 = beta.saturating_sub(self.window_steps()).max(lo);
        if w0 == beta {
            return Err(Error::SegmentFailure {
                reached: self.t(beta),
                reason: "no room for a platform transit".into(),
            });
        }
        let q_beta = history[beta - lo];
        let target = self.object(beta) * g.relative;
        let cands = self.opts.coverage.sampler.candidates(model, &target, &q_beta.platform);
        let mut rng = ChaCha8Rng::seed_from_u64(query_seed(
            self.opts.coverage.seed ^ 0x5eed,
            robot as u64,
            self.grasp_index(&g.id),
            self.t(beta),
        ));
        let mut seeds = vec![q_beta.arm];
        seeds.extend((1..self.opts.coverage.ik_seeds.max(1)).map(|_| model.arm.random_config(&mut rng)));

        let old = &history[w0 - lo..=beta - lo];
        // candidates are in sampler order, so the first maximal lookahead
        // wins ties
        let mut best: Option<Transit> = None;
        'outer: for q_p in &cands {
            if (q_p.xy() - q_beta.platform.xy()).norm() < 1e-9 && wrap_angle(q_p.z - q_beta.platform.z).abs() < 1e-9 {
                continue;
            }
            for seed in &seeds {
                let Some(q) = self.track_ik(robot, beta, g, q_p, seed) else { continue };
                if self.track_fault(robot, beta, g, &q, None).is_some() {
                    continue;
                }
                let fwd = self.plan_manipulator(robot, g, beta, &q, seg_end, Direction::Forward);
                if fwd.reached <= beta || best.as_ref().is_some_and(|b| fwd.reached <= b.lookahead) {
                    continue;
                }
                let back = self.plan_manipulator(robot, g, beta, &q, w0, Direction::Backward);
                if back.reached > w0 {
                    continue;
                }
                let Some(configs) = self.transit(robot, g, w0, old, &back.configs) else { continue };
                best = Some(Transit {
                    start: w0,
                    configs,
                    end: beta,
                    platform: *q_p,
                    lookahead: fwd.reached,
                });
                if fwd.reached == seg_end {
                    break 'outer;
                }
            }
        }
        best.ok_or_else(|| Error::SegmentFailure {
            reached: self.t(beta),
            reason: "no platform candidate extends the arm trajectory".into(),
        })
    }

    /// Platform moves linearly from the old plan's pose to the new one over
    /// the window while the arm keeps tracking. `old[j]` and
    /// `back[len - 1 - j]` are the old and new arm plans at `w0 + j`; the IK
    /// seed blends from one to the other so the transit lands on `back[0]`.
    fn transit(&self, robot: usize, g: &Grasp, w0: usize, old: &[Config], back: &[Config]) -> Option<Vec<Config>> {
        let from = old[0];
        let to = back[0].platform;
        let w = old.len() - 1;
        let mut out = vec![from];
        let mut prev = from;
        let dth = wrap_angle(to.z - from.platform.z);
        for j in 1..=w {
            let s = j as f64 / w as f64;
            let mut p = from.platform.lerp(&to, s);
            p.z = if j == w { to.z } else { from.platform.z + s * dth };
            let seed = old[j].arm.lerp(&back[w - j].arm, s);
            let q = self.track_ik(robot, w0 + j, g, &p, &seed)?;
            if self.track_fault(robot, w0 + j, g, &q, Some(&prev)).is_some() {
                return None;
            }
            out.push(q);
            prev = q;
        }
        Some(out)
    }

    /// Covers grid indices `start..=end` with grasp `g`, moving the platform
    /// whenever the arm alone stalls.
    pub fn coordinated_platform_plan(&self, robot: usize, g: &Grasp, start: usize, end: usize, q0: &Config) -> Result<SegmentPlan> {
        let mut configs = vec![*q0];
        let mut events = vec![Event::Track];
        if let Some(f) = self.track_fault(robot, start, g, q0, None) {
            return Err(Error::SegmentFailure {
                reached: self.t(start),
                reason: format!("start configuration invalid ({f})"),
            });
        }
        let mut transits = 0;
        let mut lo = start;
        let mut cur = start;
        while cur < end {
            let part = self.plan_manipulator(robot, g, cur, &configs[cur - start], end, Direction::Forward);
            configs.truncate(cur - start + 1);
            events.truncate(cur - start + 1);
            configs.extend_from_slice(&part.configs[1..]);
            events.extend(std::iter::repeat_n(Event::Track, part.configs.len() - 1));
            cur = part.reached;
            if cur == end {
                break;
            }
            if transits >= self.opts.max_transits {
                return Err(Error::SegmentFailure {
                    reached: self.t(cur),
                    reason: "too many platform transits".into(),
                });
            }
            let tr = self
                .connect_plan(robot, g, lo, &configs[lo - start..], cur, end)
                .map_err(|e| match e {
                    Error::SegmentFailure { reached, reason } => Error::SegmentFailure {
                        reached,
                        reason: format!("{reason} (arm stalled: {})", part.stall.unwrap_or("segment end")),
                    },
                    other => other,
                })?;
            for (j, q) in tr.configs.iter().enumerate().skip(1) {
                configs[tr.start + j - start] = *q;
                events[tr.start + j - start] = Event::PlatformTransit;
            }
            transits += 1;
            lo = tr.start.max(start);
        }
        Ok(SegmentPlan {
            start,
            configs,
            events,
            transits,
        })
    }

    /// Valid configurations realizing `g` at grid index `k`, drawn from the
    /// given platforms and IK seeds.
    fn grasp_configs(
        &self,
        robot: usize,
        k: usize,
        g: &Grasp,
        platforms: &[Vector3<f64>],
        seeds: &[ArmConfig],
        others: &[(usize, Config)],
    ) -> Vec<Config> {
        let model = self.scene.robot(robot);
        let obj = self.object(k);
        let target = obj * g.relative;
        let site = [g.relative];
        let mut out: Vec<Config> = Vec::new();
        for q_p in platforms {
            if !model.platform.bounds.contains(q_p) {
                continue;
            }
            for seed in seeds {
                let Some(arm) = model.ik_arm_world(q_p, &target, seed, &self.opts.coverage.ik) else { continue };
                let q = Config::new(*q_p, arm);
                if model.manipulability(&q) < self.opts.manipulability_floor {
                    continue;
                }
                if !self.scene.in_cfree(robot, &q, &obj, others, Exemption::Sites(&site)) {
                    continue;
                }
                if !out.iter().any(|o| o.platform == q.platform && (o.arm - q.arm).amax() < 1e-6) {
                    out.push(q);
                }
            }
        }
        out
    }

    fn seeds(&self, robot: usize, first: &ArmConfig, salt: u64, k: usize) -> Vec<ArmConfig> {
        let model = self.scene.robot(robot);
        let mut rng = ChaCha8Rng::seed_from_u64(query_seed(self.opts.coverage.seed ^ salt, robot as u64, 0, self.t(k)));
        let mut seeds = vec![*first];
        seeds.extend((1..self.opts.coverage.ik_seeds.max(1)).map(|_| model.arm.random_config(&mut rng)));
        seeds
    }

    /// Candidate grasp configurations ordered by decreasing manipulability.
    pub fn ranked_grasp_configs(&self, robot: usize, k: usize, g: &Grasp, near: &Config, others: &[(usize, Config)]) -> Vec<Config> {
        let model = self.scene.robot(robot);
        let target = self.object(k) * g.relative;
        let mut platforms = vec![near.platform];
        platforms.extend(self.opts.coverage.sampler.candidates(model, &target, &near.platform));
        let seeds = self.seeds(robot, &near.arm, 0xa11, k);
        let mut c = self.grasp_configs(robot, k, g, &platforms, &seeds, others);
        // stable: ties keep candidate order
        c.sort_by(|a, b| model.manipulability(b).partial_cmp(&model.manipulability(a)).unwrap());
        c
    }

    /// Configuration realizing `g` at index `k` from which the arm alone
    /// tracks furthest toward `until`. Candidates stay on `preferred`'s
    /// platform when any exist there, else the most manipulable ones
    /// elsewhere are tried; ties go to the closest arm solution.
    pub fn start_config(&self, robot: usize, k: usize, g: &Grasp, preferred: &Config, until: usize) -> Option<Config> {
        const TRIES: usize = 8;
        let seeds = self.seeds(robot, &preferred.arm, 0x57a, k);
        let others: Vec<(usize, Config)> = self.fixed.iter().map(|(j, c)| (*j, c[k])).collect();
        let mut here = self.grasp_configs(robot, k, g, &[preferred.platform], &seeds, &others);
        here.sort_by(|a, b| {
            (a.arm - preferred.arm)
                .norm()
                .partial_cmp(&(b.arm - preferred.arm).norm())
                .unwrap()
        });
        let mut cands: Vec<Config> = here
            .into_iter()
            .filter(|q| self.track_fault(robot, k, g, q, None).is_none())
            .take(TRIES)
            .collect();
        if cands.is_empty() {
            cands = self
                .ranked_grasp_configs(robot, k, g, preferred, &others)
                .into_iter()
                .filter(|q| self.track_fault(robot, k, g, q, None).is_none())
                .take(TRIES)
                .collect();
        }
        let mut best: Option<(usize, Config)> = None;
        for q in cands {
            let reached = self.plan_manipulator(robot, g, k, &q, until, Direction::Forward).reached;
            if best.as_ref().is_none_or(|(r, _)| reached > *r) {
                best = Some((reached, q));
            }
            if reached == until {
                break;
            }
        }
        best.map(|(_, q)| q)
    }

    /// Free-space motion from `q_a` (holding `from`) to the most
    /// manipulable configuration holding `to` at grid index `k`, with the
    /// object and the `others` frozen. The returned path starts at `q_a`
    /// and ends at the new grasp configuration.
    pub fn plan_regrasp(&self, robot: usize, k: usize, q_a: &Config, from: &Grasp, to: &Grasp, others: &[(usize, Config)]) -> Result<Vec<Config>> {
        if from.id == to.id {
            return Ok(vec![*q_a]);
        }
        let targets = self.ranked_grasp_configs(robot, k, to, q_a, others);
        if targets.is_empty() {
            return Err(Error::RegraspInfeasible(format!(
                "robot {robot}: no configuration holds '{}' at t = {:.4}",
                to.id,
                self.t(k)
            )));
        }
        let r = self.scene.approach_radius;
        let (sa, ca) = 0.6f64.sin_cos();
        let tilts = [
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(sa, 0.0, -ca),
            Vector3::new(-sa, 0.0, -ca),
            Vector3::new(0.0, sa, -ca),
            Vector3::new(0.0, -sa, -ca),
        ];
        let retracts: Vec<Option<&Vector3<f64>>> = tilts.iter().map(Some).chain([None]).collect();
        for search in [false, true] {
            for q_b in targets.iter().take(self.opts.regrasp_targets) {
                for dir in &retracts {
                    for d in [r, 1.5 * r, 2.0 * r] {
                        if let Some(path) = self.free_path(robot, k, q_a, q_b, *dir, d, search, others) {
                            return Ok(path);
                        }
                    }
                }
            }
        }
        Err(Error::RegraspInfeasible(format!(
            "robot {robot}: free path to '{}' at t = {:.4} blocked",
            to.id,
            self.t(k)
        )))
    }

    fn free_ok(&self, robot: usize, q: &Config, obj: &Pose, sites: &[Pose], others: &[(usize, Config)], prev: &Config) -> bool {
        self.step_ok(prev, q)
            && self.scene.in_cfree(robot, q, obj, others, Exemption::Sites(sites))
    }

    /// Straight-line end-effector motion from `anchor` by `d` along the
    /// tool-frame direction `dir`, with the platform still.
    fn approach_line(&self, robot: usize, anchor: &Config, dir: &Vector3<f64>, d: f64) -> Option<Vec<Config>> {
        let model = self.scene.robot(robot);
        let ee = model.fk(anchor);
        let m = ((d / 0.02).ceil() as usize).max(1);
        let mut out = Vec::with_capacity(m);
        let mut prev = *anchor;
        for j in 1..=m {
            let off = dir * (d * j as f64 / m as f64);
            let target = ee * Pose::from_translation(off.x, off.y, off.z);
            let arm = model.ik_arm_world(&anchor.platform, &target, &prev.arm, &self.opts.coverage.ik)?;
            let q = Config::new(anchor.platform, arm);
            out.push(q);
            prev = q;
        }
        Some(out)
    }

    /// Appends a joint-space straight line from the end of `leg` to `to`.
    fn free_leg(&self, robot: usize, leg: &mut Vec<Config>, to: &Config, obj: &Pose, sites: &[Pose], others: &[(usize, Config)]) -> bool {
        let last = *leg.last().unwrap();
        let da = (to.arm - last.arm).amax();
        let dp = (to.platform.xy() - last.platform.xy()).norm();
        let dth = wrap_angle(to.platform.z - last.platform.z).abs();
        let m = ((da / 0.1).max(dp / 0.05).max(dth / 0.1).ceil() as usize).max(1);
        for j in 1..=m {
            let q = last.lerp(to, j as f64 / m as f64);
            if !self.free_ok(robot, &q, obj, sites, others, leg.last().unwrap()) {
                return false;
            }
            leg.push(q);
        }
        true
    }

    /// Backs the platform away by `d` with the arm still, along the
    /// horizontal part of the tool axis or, failing that, the heading.
    fn platform_retreat(&self, robot: usize, anchor: &Config, d: f64) -> Vec<Config> {
        let axis = self.scene.robot(robot).fk(anchor).rotation.column(2).into_owned();
        let h = nalgebra::Vector2::new(-axis.x, -axis.y);
        let dir = if h.norm() > 0.3 {
            h.normalize()
        } else {
            -nalgebra::Vector2::new(anchor.platform.z.cos(), anchor.platform.z.sin())
        };
        let m = ((d / 0.02).ceil() as usize).max(1);
        (1..=m)
            .map(|j| {
                let off = dir * (d * j as f64 / m as f64);
                let mut q = *anchor;
                q.platform.x += off.x;
                q.platform.y += off.y;
                q
            })
            .collect()
    }

    /// Bidirectional RRT between two free configurations, for when the
    /// straight legs are blocked. The result is densified and starts at
    /// `from`.
    #[allow(clippy::too_many_arguments)]
    fn free_search(&self, robot: usize, from: &Config, to: &Config, obj: &Pose, sites: &[Pose], others: &[(usize, Config)], k: usize) -> Option<Vec<Config>> {
        const ITERS: usize = 1500;
        const REACH: f64 = 6.0;
        let model = self.scene.robot(robot);
        let mut rng = ChaCha8Rng::seed_from_u64(query_seed(self.opts.coverage.seed ^ 0xf4ee, robot as u64, k as u64, self.t(k)));
        let steps = |a: &Config, b: &Config| {
            ((b.arm - a.arm).amax() / 0.1)
                .max((b.platform.xy() - a.platform.xy()).norm() / 0.05)
                .max(wrap_angle(b.platform.z - a.platform.z).abs() / 0.1)
        };
        let edge_ok = |a: &Config, b: &Config| {
            let m = (steps(a, b).ceil() as usize).max(1);
            (1..=m).all(|j| {
                let q = a.lerp(b, j as f64 / m as f64);
                self.scene.in_cfree(robot, &q, obj, others, Exemption::Sites(sites))
            })
        };
        let b = &model.platform.bounds;
        let lo_x = b.x[0].max(from.platform.x.min(to.platform.x) - 1.0);
        let hi_x = b.x[1].min(from.platform.x.max(to.platform.x) + 1.0);
        let lo_y = b.y[0].max(from.platform.y.min(to.platform.y) - 1.0);
        let hi_y = b.y[1].min(from.platform.y.max(to.platform.y) + 1.0);
        let sample = |rng: &mut ChaCha8Rng| {
            use rand::Rng;
            let mut arm = ArmConfig::zeros();
            for (i, [l, h]) in model.arm.limits.iter().enumerate() {
                let a = from.arm[i].min(to.arm[i]) - std::f64::consts::PI;
                let z = from.arm[i].max(to.arm[i]) + std::f64::consts::PI;
                arm[i] = rng.gen_range(a.max(*l)..=z.min(*h));
            }
            let th = from.platform.z + rng.gen_range(-1.0..=1.0) * std::f64::consts::PI;
            Config::new(Vector3::new(rng.gen_range(lo_x..=hi_x), rng.gen_range(lo_y..=hi_y), wrap_angle(th)), arm)
        };
        // trees: (config, parent)
        let mut trees: [Vec<(Config, usize)>; 2] = [vec![(*from, usize::MAX)], vec![(*to, usize::MAX)]];
        let steer = |a: &Config, b: &Config| {
            let n = steps(a, b);
            if n <= REACH {
                *b
            } else {
                a.lerp(b, REACH / n)
            }
        };
        let nearest = |tree: &[(Config, usize)], q: &Config| {
            (0..tree.len())
                .min_by(|&i, &j| steps(&tree[i].0, q).partial_cmp(&steps(&tree[j].0, q)).unwrap())
                .unwrap()
        };
        let mut joined = None;
        for it in 0..ITERS {
            let (a, bt) = if it % 2 == 0 { (0, 1) } else { (1, 0) };
            let q_rand = sample(&mut rng);
            let na = nearest(&trees[a], &q_rand);
            let q_new = steer(&trees[a][na].0, &q_rand);
            if !edge_ok(&trees[a][na].0, &q_new) {
                continue;
            }
            trees[a].push((q_new, na));
            let ia = trees[a].len() - 1;
            // connect the other tree greedily
            let mut nb = nearest(&trees[bt], &q_new);
            loop {
                let cur = trees[bt][nb].0;
                let q = steer(&cur, &q_new);
                if !edge_ok(&cur, &q) {
                    break;
                }
                trees[bt].push((q, nb));
                nb = trees[bt].len() - 1;
                if steps(&q, &q_new) < 1e-9 {
                    joined = Some(if a == 0 { (ia, nb) } else { (nb, ia) });
                    break;
                }
            }
            if joined.is_some() {
                break;
            }
        }
        let (i0, i1) = joined?;
        let walk = |tree: &[(Config, usize)], mut i: usize| {
            let mut out = Vec::new();
            while i != usize::MAX {
                out.push(tree[i].0);
                i = tree[i].1;
            }
            out
        };
        let mut way = walk(&trees[0], i0);
        way.reverse();
        way.extend(walk(&trees[1], i1).into_iter().skip(1));
        // shortcut
        for _ in 0..60 {
            use rand::Rng;
            if way.len() < 3 {
                break;
            }
            let i = rng.gen_range(0..way.len() - 2);
            let j = rng.gen_range(i + 2..way.len());
            if edge_ok(&way[i], &way[j]) {
                way.drain(i + 1..j);
            }
        }
        let mut leg = vec![*from];
        for q in &way[1..] {
            if !self.free_leg(robot, &mut leg, q, obj, sites, others) {
                return None;
            }
        }
        Some(leg)
    }

    #[allow(clippy::too_many_arguments)]
    fn free_path(&self, robot: usize, k: usize, q_a: &Config, q_b: &Config, retract: Option<&Vector3<f64>>, d: f64, search: bool, others: &[(usize, Config)]) -> Option<Vec<Config>> {
        let obj = self.object(k);
        let sites = self.sites();
        let mut path = vec![*q_a];
        // retract
        let ret = match retract {
            Some(dir) => self.approach_line(robot, q_a, dir, d),
            None => Some(self.platform_retreat(robot, q_a, d)),
        };
        for q in ret? {
            if !self.free_ok(robot, &q, &obj, &sites, others, path.last().unwrap()) {
                return None;
            }
            path.push(q);
        }
        // pre-grasp pose behind q_b, reached by walking back from q_b
        let back = self.approach_line(robot, q_b, &-Vector3::z(), d)?;
        let pre = *back.last().unwrap();
        let last = *path.last().unwrap();
        // direct, else through the robot's initial arm posture
        let tuck = self.scene.robots[robot].initial.arm;
        let vias = [
            vec![],
            vec![Config::new(last.platform, tuck)],
            vec![Config::new(pre.platform, tuck)],
            vec![Config::new(last.platform, tuck), Config::new(pre.platform, tuck)],
        ];
        let leg = vias.iter().find_map(|via| {
            let mut leg = vec![last];
            for to in via.iter().chain(std::iter::once(&pre)) {
                if !self.free_leg(robot, &mut leg, to, &obj, &sites, others) {
                    return None;
                }
            }
            Some(leg)
        });
        let leg = match leg {
            Some(leg) => leg,
            None if search => self.free_search(robot, &last, &pre, &obj, &sites, others, k)?,
            None => return None,
        };
        path.extend_from_slice(&leg[1..]);
        // approach: the walk-back in reverse, ending exactly at q_b
        for q in back.iter().rev().skip(1).chain(std::iter::once(q_b)) {
            if !self.free_ok(robot, q, &obj, &sites, others, path.last().unwrap()) {
                return None;
            }
            path.push(*q);
        }
        Some(path)
    }

    /// Plans every robot for one assignment and merges the result into the
    /// shared step sequence.
    pub fn plan_assignment(&self, assignment: &Assignment) -> Result<MultiRobotPlan> {
        let n = self.n();
        let scene = self.scene;
        // per robot: configuration at every grid index (arrival), events,
        // and regrasp paths keyed by grid index
        struct RobotPlan {
            configs: Vec<Config>,
            events: Vec<Event>,
            grasps: Vec<String>,
            regrasps: Vec<(usize, Vec<Config>, String, String)>,
            transits: usize,
        }
        let mut plans: Vec<RobotPlan> = Vec::with_capacity(scene.n_robots());
        let mut sub = Planner::new(self.scene, self.traj, self.grasps, self.opts);
        for scheme in &assignment.schemes {
            let r = scheme.owner;
            sub.fixed = assignment
                .schemes
                .iter()
                .zip(&plans)
                .map(|(s, p)| (s.owner, p.configs.clone()))
                .collect();
            let mut configs: Vec<Config> = Vec::with_capacity(n);
            let mut events = Vec::with_capacity(n);
            let mut grasps = Vec::with_capacity(n);
            let mut regrasps = Vec::new();
            let mut transits = 0;
            let mut start_cfg: Option<Config> = None;
            for (si, seg) in scheme.segments.iter().enumerate() {
                let g = self.grasp(&seg.grasp)?;
                let k0 = grid_index(seg.active.0, n);
                let k1 = grid_index(seg.active.1, n);
                let q0 = match start_cfg {
                    Some(q) => q,
                    None => sub.start_config(r, k0, g, &scene.robots[r].initial, k1).ok_or_else(|| {
                        Error::SegmentFailure {
                            reached: self.t(k0),
                            reason: format!("robot {r}: no start configuration for '{}'", g.id),
                        }
                    })?,
                };
                let sp = sub.coordinated_platform_plan(r, g, k0, k1, &q0).map_err(|e| match e {
                    Error::SegmentFailure { reached, reason } => Error::SegmentFailure {
                        reached,
                        reason: format!("robot {r}, grasp '{}': {reason}", g.id),
                    },
                    other => other,
                })?;
                transits += sp.transits;
                let skip = if si == 0 { 0 } else { 1 };
                configs.extend_from_slice(&sp.configs[skip..]);
                events.extend_from_slice(&sp.events[skip..]);
                grasps.extend(std::iter::repeat_n(g.id.clone(), sp.configs.len() - skip));
                if let Some(next) = scheme.segments.get(si + 1) {
                    let to = self.grasp(&next.grasp)?;
                    let q_a = *configs.last().unwrap();
                    let others: Vec<(usize, Config)> = sub.fixed.iter().map(|(j, c)| (*j, c[k1])).collect();
                    let path = self.plan_regrasp(r, k1, &q_a, g, to, &others)?;
                    start_cfg = Some(*path.last().unwrap());
                    regrasps.push((k1, path, g.id.clone(), to.id.clone()));
                }
            }
            debug_assert_eq!(configs.len(), n);
            plans.push(RobotPlan {
                configs,
                events,
                grasps,
                regrasps,
                transits,
            });
        }

        // merge onto the shared step sequence
        let nr = plans.len();
        let mut knots: Vec<Vec<Knot>> = vec![Vec::new(); nr];
        let mut pauses = Vec::new();
        let mut current: Vec<(Config, Option<String>)> = plans
            .iter()
            .map(|p| (p.configs[0], Some(p.grasps[0].clone())))
            .collect();
        for k in 0..n {
            let t = self.t(k);
            for (r, p) in plans.iter().enumerate() {
                // arrival grasp at k is the one held coming in
                let g = if k > 0 && p.regrasps.iter().any(|(h, ..)| *h == k) {
                    p.grasps[k - 1].clone()
                } else {
                    p.grasps[k].clone()
                };
                current[r] = (p.configs[k], Some(g));
                let event = if k > 0 && p.events[k] == Event::PlatformTransit {
                    Event::PlatformTransit
                } else {
                    Event::Track
                };
                knots[r].push(Knot {
                    t,
                    config: current[r].0,
                    grasp: current[r].1.clone(),
                    event,
                });
            }
            for (r, p) in plans.iter().enumerate() {
                for (h, path, from, to) in &p.regrasps {
                    if *h != k {
                        continue;
                    }
                    let first = knots[r].len();
                    for (j, q) in path.iter().enumerate().skip(1) {
                        let last = j == path.len() - 1;
                        for (o, kn) in knots.iter_mut().enumerate() {
                            if o == r {
                                kn.push(Knot {
                                    t,
                                    config: *q,
                                    grasp: if last { Some(to.clone()) } else { None },
                                    event: if last { Event::Track } else { Event::RegraspFree },
                                });
                            } else {
                                kn.push(Knot {
                                    t,
                                    config: current[o].0,
                                    grasp: current[o].1.clone(),
                                    event: Event::Hold,
                                });
                            }
                        }
                    }
                    current[r] = (*path.last().unwrap(), Some(to.clone()));
                    pauses.push(Pause {
                        robot: r,
                        t,
                        steps: (first, knots[r].len() - 1),
                        from: from.clone(),
                        to: to.clone(),
                    });
                }
            }
        }
        Ok(MultiRobotPlan {
            robots: knots
                .into_iter()
                .enumerate()
                .map(|(r, k)| RobotTrajectory {
                    robot: r,
                    knots: k,
                    xi: self.opts.xi,
                })
                .collect(),
            pauses,
            assignment: assignment.clone(),
            diagnostics: Diagnostics {
                assignment_rank: assignment.rank,
                failures: Vec::new(),
                transits: plans.iter().map(|p| p.transits).collect(),
            },
        })
    }

    /// Coverage sweep for every robot.
    pub fn coverage(&self) -> Result<Coverage> {
        ik_check_all(self.scene, self.traj, self.grasps, &self.opts.coverage)
    }

    /// Full pipeline: coverage, early failure on gaps, ranked assignments,
    /// per-assignment planning and checking.
    pub fn global_plan(&self) -> Result<MultiRobotPlan> {
        let coverage = self.coverage()?;
        self.global_plan_with(&coverage)
    }

    /// [`Planner::global_plan`] on a precomputed coverage.
    pub fn global_plan_with(&self, coverage: &Coverage) -> Result<MultiRobotPlan> {
        if self.grasps.is_empty() {
            return Err(Error::Precondition("grasp set is empty".into()));
        }
        if self.grasps.len() < self.scene.n_robots() {
            return Err(Error::Precondition(format!(
                "{} grasps for {} robots",
                self.grasps.len(),
                self.scene.n_robots()
            )));
        }
        if let Some((robot, gaps)) = coverage.first_gap() {
            return Err(Error::NotCoverable { robot, gaps });
        }
        let sets: Vec<&RobotSets> = coverage.robots.iter().map(|r| r.per_grasp.as_slice()).collect();
        let mut search = AssignmentSearch::new(&sets, self.scene.leader, self.n())?;
        if search.is_empty() {
            return Err(Error::AssignmentInfeasible);
        }
        let mut failures = Vec::new();
        for _ in 0..self.opts.max_alternatives.max(1) {
            let Some(a) = search.next_alternative() else { break };
            match self.plan_assignment(&a) {
                Ok(mut plan) => {
                    let report = trajectory_check(self.scene, self.traj, self.grasps, &plan, &self.opts);
                    if report.pass {
                        plan.diagnostics.failures = failures;
                        return Ok(plan);
                    }
                    let v = &report.violations[0];
                    failures.push(format!(
                        "assignment {}: check failed at step {} robot {} ({:?}: {})",
                        a.rank, v.step, v.robot, v.kind, v.detail
                    ));
                }
                Err(e) => failures.push(format!("assignment {}: {e}", a.rank)),
            }
        }
        Err(Error::PlannerFailure { attempts: failures })
    }
}

/// Verifies tracking, closed-chain drift, collisions and step continuity at
/// every step of `plan`.
pub fn trajectory_check(scene: &Scene, traj: &ObjectTrajectory, grasps: &[Grasp], plan: &MultiRobotPlan, opts: &PlanOptions) -> CheckReport {
    let mut rep = CheckReport::default();
    let nr = plan.robots.len();
    let steps = plan.steps();
    let tol = opts.track_tol;
    let push = |rep: &mut CheckReport, step, robot, kind, detail: String| {
        rep.violations.push(Violation { step, robot, kind, detail });
    };
    if nr != scene.n_robots() || plan.robots.iter().any(|r| r.knots.len() != steps) {
        push(&mut rep, 0, 0, ViolationKind::Structure, "robots or step counts disagree".into());
        rep.pass = false;
        return rep;
    }
    let sites: Vec<Pose> = grasps.iter().map(|g| g.relative).collect();
    let find = |id: &str| grasps.iter().find(|g| g.id == id);
    // reference relative pose per pair, reset whenever either grasp changes
    let mut reference: Vec<Vec<Option<(Pose, String, String)>>> = vec![vec![None; nr]; nr];
    for s in 0..steps {
        let t = plan.robots[0].knots[s].t;
        if plan.robots.iter().any(|r| r.knots[s].t != t) {
            push(&mut rep, s, 0, ViolationKind::Structure, "robots disagree on t".into());
            continue;
        }
        let Ok(obj) = traj.pose_at(t) else {
            push(&mut rep, s, 0, ViolationKind::Structure, format!("t = {t} outside [0, 1]"));
            continue;
        };
        let ees: Vec<Pose> = plan
            .robots
            .iter()
            .enumerate()
            .map(|(r, tr)| scene.robot(r).fk(&tr.knots[s].config))
            .collect();
        for (r, tr) in plan.robots.iter().enumerate() {
            let kn = &tr.knots[s];
            if let Some(id) = &kn.grasp {
                match find(id) {
                    Some(g) => {
                        let (dt, dr) = ees[r].distance(&(obj * g.relative));
                        rep.max_tracking.0 = rep.max_tracking.0.max(dt);
                        rep.max_tracking.1 = rep.max_tracking.1.max(dr);
                        if dt > tol || dr > tol {
                            push(&mut rep, s, r, ViolationKind::Tracking, format!("error {dt:.3e} m, {dr:.3e} rad"));
                        }
                    }
                    None => push(&mut rep, s, r, ViolationKind::Structure, format!("unknown grasp '{id}'")),
                }
            } else if kn.event != Event::RegraspFree {
                push(&mut rep, s, r, ViolationKind::Structure, "no grasp outside a regrasp".into());
            }
            let others: Vec<(usize, Config)> = plan
                .robots
                .iter()
                .enumerate()
                .filter(|(o, _)| *o != r)
                .map(|(o, ot)| (o, ot.knots[s].config))
                .collect();
            let own: Vec<Pose>;
            let ex = match kn.grasp.as_deref().and_then(find) {
                Some(g) if kn.event != Event::RegraspFree => {
                    own = vec![g.relative];
                    Exemption::Sites(&own)
                }
                _ => Exemption::Sites(&sites),
            };
            if !scene.in_cfree(r, &kn.config, &obj, &others, ex) {
                push(&mut rep, s, r, ViolationKind::Collision, format!("t = {t:.4}"));
            }
            if s > 0 {
                let prev = &tr.knots[s - 1];
                let (a, b) = (&prev.config, &kn.config);
                let da = (a.arm - b.arm).amax();
                let dp = (a.platform.xy() - b.platform.xy()).norm();
                let dth = wrap_angle(a.platform.z - b.platform.z).abs();
                if da > opts.joint_step + 1e-12 || dp > opts.platform_step + 1e-12 || dth > opts.platform_turn + 1e-12 {
                    push(&mut rep, s, r, ViolationKind::Step, format!("joint {da:.3}, platform {dp:.3} m / {dth:.3} rad"));
                }
                let moved = dp > 1e-12 || dth > 1e-12;
                if moved && matches!(kn.event, Event::Track | Event::Hold) && prev.event != Event::RegraspFree {
                    push(&mut rep, s, r, ViolationKind::PlatformMotion, "platform moved while tracking".into());
                }
                if kn.event == Event::Hold && a != b {
                    push(&mut rep, s, r, ViolationKind::HoldMotion, "configuration changed during hold".into());
                }
            }
        }
        for i in 0..nr {
            for j in i + 1..nr {
                let (ki, kj) = (&plan.robots[i].knots[s], &plan.robots[j].knots[s]);
                let held = |k: &Knot| if k.event == Event::RegraspFree { None } else { k.grasp.clone() };
                let (Some(gi), Some(gj)) = (held(ki), held(kj)) else {
                    reference[i][j] = None;
                    continue;
                };
                let rel = ees[i].inverse() * ees[j];
                match &reference[i][j] {
                    Some((r0, a, b)) if *a == gi && *b == gj => {
                        let (dt, dr) = rel.distance(r0);
                        rep.max_drift.0 = rep.max_drift.0.max(dt);
                        rep.max_drift.1 = rep.max_drift.1.max(dr);
                        if dt > 2.0 * tol || dr > 2.0 * tol {
                            push(&mut rep, s, j, ViolationKind::ClosedChain, format!("robots {i}-{j}: {dt:.3e} m, {dr:.3e} rad"));
                        }
                    }
                    _ => reference[i][j] = Some((rel, gi, gj)),
                }
            }
        }
    }
    rep.pass = rep.violations.is_empty();
    rep
}

/// Convenience wrapper: [`Planner::global_plan`] with the given options.
pub fn global_plan(scene: &Scene, traj: &ObjectTrajectory, grasps: &[Grasp], opts: &PlanOptions) -> Result<MultiRobotPlan> {
    Planner::new(scene, traj, grasps, *opts).global_plan()
}
