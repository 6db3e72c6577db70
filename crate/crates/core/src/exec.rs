//! Kinematic replay of a plan with a disturbed leader.
//!
//! The leader executes its planned knots plus noise and defines where the
//! object is. Every other robot that holds the object re-solves its
//! configuration so that its end-effector keeps the planned pose relative
//! to the leader's.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::{Grasp, PlatformSampler};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::model::{wrap_angle, ArmConfig, Config, IkOptions, RobotModel};
use crate::plan::{Event, Knot, MultiRobotPlan};
use crate::scene::Scene;

/// Zero-mean uniform noise on the leader, drawn independently per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    /// Half-width of the platform x/y noise (m).
    pub sigma_p: f64,
    /// Half-width of the per-joint and heading noise (rad).
    pub sigma_m: f64,
    pub seed: u64,
}

impl Disturbance {
    pub fn none() -> Self {
        Self { sigma_p: 0.0, sigma_m: 0.0, seed: 0 }
    }
}

/// Relative-pose error of `follower` with respect to `reference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub reference: usize,
    pub follower: usize,
    pub translation: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// Executed configuration per robot.
    pub configs: Vec<Config>,
    /// Object pose implied by the reference robot, if it holds a grasp.
    pub object: Option<Pose>,
    pub residuals: Vec<Residual>,
    /// Robots whose correction failed at this step.
    pub faults: Vec<usize>,
}

impl StepRecord {
    pub fn max_residual(&self) -> (f64, f64) {
        self.residuals
            .iter()
            .fold((0.0, 0.0), |(a, b), r| (a.max(r.translation), b.max(r.rotation)))
    }
}

/// Noise actually applied to the leader at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSample {
    pub step: usize,
    pub platform: Vector3<f64>,
    pub arm: ArmConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub disturbance: Disturbance,
    pub leader: usize,
    pub steps: Vec<StepRecord>,
    pub log: Vec<DisturbanceSample>,
}

impl ExecutionTrace {
    pub fn max_residual(&self) -> (f64, f64) {
        self.steps.iter().map(StepRecord::max_residual).fold((0.0, 0.0), |(a, b), (c, d)| (a.max(c), b.max(d)))
    }

    pub fn mean_residual(&self) -> (f64, f64) {
        let all: Vec<&Residual> = self.steps.iter().flat_map(|s| &s.residuals).collect();
        if all.is_empty() {
            return (0.0, 0.0);
        }
        let n = all.len() as f64;
        (
            all.iter().map(|r| r.translation).sum::<f64>() / n,
            all.iter().map(|r| r.rotation).sum::<f64>() / n,
        )
    }

    pub fn fault_count(&self) -> usize {
        self.steps.iter().map(|s| s.faults.len()).sum()
    }

    /// Fraction of steps whose worst residual is within `(tol_t, tol_r)`.
    pub fn fraction_within(&self, tol_t: f64, tol_r: f64) -> f64 {
        if self.steps.is_empty() {
            return 1.0;
        }
        let ok = self
            .steps
            .iter()
            .filter(|s| {
                let (a, b) = s.max_residual();
                a <= tol_t && b <= tol_r
            })
            .count();
        ok as f64 / self.steps.len() as f64
    }
}

fn holds(k: &Knot) -> bool {
    k.grasp.is_some() && k.event != Event::RegraspFree
}

/// Re-solves a follower so that its end-effector sits at
/// `leader_ee ∘ planned_relative`.
///
/// The arm is tried first from the planned arm configuration with the
/// platform where the plan puts it. If that fails the platform is moved by
/// the planar part of the target's displacement, then over a ring of
/// sampled placements.
pub fn follower_correction(
    model: &RobotModel,
    planned_relative: &Pose,
    leader_ee: &Pose,
    planned: &Config,
    ik: &IkOptions,
) -> Result<Config> {
    let target = *leader_ee * *planned_relative;
    if let Some(arm) = model.ik_arm_world(&planned.platform, &target, &planned.arm, ik) {
        return Ok(Config::new(planned.platform, arm));
    }
    let shift = target * model.fk(planned).inverse();
    let yaw = shift.rotation[(1, 0)].atan2(shift.rotation[(0, 0)]);
    let (c, s) = (yaw.cos(), yaw.sin());
    let p = planned.platform;
    let moved = Vector3::new(
        c * p.x - s * p.y + shift.translation.x,
        s * p.x + c * p.y + shift.translation.y,
        wrap_angle(p.z + yaw),
    );
    let mut candidates = vec![moved];
    candidates.extend(PlatformSampler::default().candidates(model, &target, &moved).into_iter().take(24));
    for q_p in candidates {
        if !model.platform.bounds.contains(&q_p) {
            continue;
        }
        if let Some(arm) = model.ik_arm_world(&q_p, &target, &planned.arm, ik) {
            return Ok(Config::new(q_p, arm));
        }
    }
    Err(Error::CorrectionInfeasible)
}

/// Replays `plan` step by step with the leader disturbed and followers
/// corrected.
///
/// When the leader is between grasps the lowest-index holder serves as the
/// reference. Robots moving freely during a regrasp execute their plan
/// uncorrected. A failed correction is logged as a fault and the robot
/// keeps its last executed configuration.
pub fn simulate(scene: &Scene, plan: &MultiRobotPlan, grasps: &[Grasp], disturbance: &Disturbance) -> Result<ExecutionTrace> {
    let nr = plan.robots.len();
    if nr != scene.n_robots() {
        return Err(Error::Precondition(format!("plan has {nr} robots, scene has {}", scene.n_robots())));
    }
    let steps = plan.steps();
    if plan.robots.iter().any(|r| r.knots.len() != steps) {
        return Err(Error::Precondition("robots disagree on step count".into()));
    }
    let leader = scene.leader;
    let ik = IkOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(disturbance.seed);
    let noise = |w: f64, rng: &mut ChaCha8Rng| if w > 0.0 { rng.gen_range(-w..=w) } else { 0.0 };
    let mut last: Vec<Config> = plan.robots.iter().filter_map(|r| r.knots.first().map(|k| k.config)).collect();
    let mut out = ExecutionTrace {
        disturbance: *disturbance,
        leader,
        steps: Vec::with_capacity(steps),
        log: Vec::with_capacity(steps),
    };
    for s in 0..steps {
        let knots: Vec<&Knot> = plan.robots.iter().map(|r| &r.knots[s]).collect();
        let t = knots[0].t;

        let lk = knots[leader];
        let dp = Vector3::new(
            noise(disturbance.sigma_p, &mut rng),
            noise(disturbance.sigma_p, &mut rng),
            noise(disturbance.sigma_m, &mut rng),
        );
        let mut da = ArmConfig::zeros();
        for j in 0..da.len() {
            da[j] = noise(disturbance.sigma_m, &mut rng);
        }
        out.log.push(DisturbanceSample { step: s, platform: dp, arm: da });
        let lmodel = scene.robot(leader);
        let mut arm = lk.config.arm + da;
        lmodel.arm.clamp(&mut arm);
        let mut platform = lk.config.platform + dp;
        platform.z = wrap_angle(platform.z);
        let mut configs: Vec<Config> = knots.iter().map(|k| k.config).collect();
        configs[leader] = Config::new(platform, arm);

        let reference = if holds(lk) { Some(leader) } else { (0..nr).find(|&r| holds(knots[r])) };
        let mut residuals = Vec::new();
        let mut faults = Vec::new();
        let mut object = None;
        if let Some(r0) = reference {
            let ref_ee = scene.robot(r0).fk(&configs[r0]);
            if let Some(g) = knots[r0].grasp.as_deref().and_then(|id| grasps.iter().find(|g| g.id == id)) {
                object = Some(ref_ee * g.relative.inverse());
            }
            let ref_planned = scene.robot(r0).fk(&knots[r0].config);
            for f in (0..nr).filter(|&f| f != r0 && holds(knots[f])) {
                let model = scene.robot(f);
                let planned_rel = ref_planned.inverse() * model.fk(&knots[f].config);
                match follower_correction(model, &planned_rel, &ref_ee, &knots[f].config, &ik) {
                    Ok(q) => configs[f] = q,
                    Err(_) => {
                        configs[f] = last[f];
                        faults.push(f);
                    }
                }
                let rel = ref_ee.inverse() * model.fk(&configs[f]);
                let (dt, dr) = rel.distance(&planned_rel);
                residuals.push(Residual {
                    reference: r0,
                    follower: f,
                    translation: dt,
                    rotation: dr,
                });
            }
        }
        last.clone_from(&configs);
        out.steps.push(StepRecord {
            step: s,
            t,
            configs,
            object,
            residuals,
            faults,
        });
    }
    Ok(out)
}
