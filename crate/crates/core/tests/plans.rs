use std::sync::OnceLock;

use proptest::prelude::*;

use cochain::exec::{simulate, Disturbance};
use cochain::io;
use cochain::plan::{trajectory_check, Event, MultiRobotPlan, PlanOptions, Planner};
use cochain::scenarios::{self, Problem};

fn desk_low() -> &'static (Problem, MultiRobotPlan) {
    static CELL: OnceLock<(Problem, MultiRobotPlan)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = scenarios::desk_low();
        let plan = Planner::new(&p.scene, &p.trajectory, &p.grasps, PlanOptions::default()).global_plan().unwrap();
        (p, plan)
    })
}

fn holds(plan: &MultiRobotPlan, r: usize, s: usize) -> bool {
    let k = &plan.robots[r].knots[s];
    k.grasp.is_some() && k.event != Event::RegraspFree
}

fn assert_invariants(p: &Problem, plan: &MultiRobotPlan) {
    for (r, tr) in plan.robots.iter().enumerate() {
        let robot = p.scene.robot(r);
        for (s, k) in tr.knots.iter().enumerate() {
            if holds(plan, r, s) {
                let g = p.grasps.iter().find(|g| Some(&g.id) == k.grasp.as_ref()).unwrap();
                let target = p.trajectory.pose_at(k.t).unwrap() * g.relative;
                let (dt, dr) = robot.fk(&k.config).distance(&target);
                assert!(dt <= 1e-4 && dr <= 1e-4, "robot {r} step {s}: {dt:e} {dr:e}");
            }
            if s > 0 {
                let prev = &tr.knots[s - 1];
                if prev.config.platform != k.config.platform {
                    assert!(
                        matches!(k.event, Event::PlatformTransit | Event::RegraspFree) || prev.event == Event::RegraspFree,
                        "robot {r} platform moved at step {s} during {:?}",
                        k.event
                    );
                }
            }
        }
    }
    // the plan comes from the first assignment that survived its check
    assert_eq!(plan.diagnostics.failures.len(), plan.diagnostics.assignment_rank);
    assert_eq!(plan.regrasp_count(), plan.assignment.regrasp_count());
    assert!(trajectory_check(&p.scene, &p.trajectory, &p.grasps, plan, &PlanOptions::default()).pass);
}

#[test]
fn desk_low_plan_invariants() {
    let (p, plan) = desk_low();
    assert_eq!(plan.regrasp_count(), 1);
    assert_invariants(p, plan);
}

#[test]
fn plan_file_round_trip() {
    let (_, plan) = desk_low();
    let text = io::plan_json(plan).unwrap();
    let back = io::parse_plan(&text).unwrap();
    assert_eq!(&back, plan);
    assert_eq!(io::plan_json(&back).unwrap(), text);
}

#[test]
fn correction_is_suspended_for_a_regrasping_robot() {
    let (p, plan) = desk_low();
    let d = Disturbance {
        sigma_p: 0.005,
        sigma_m: 0.01,
        seed: 3,
    };
    let trace = simulate(&p.scene, plan, &p.grasps, &d).unwrap();
    assert_eq!(trace.steps.len(), plan.steps());
    let mut free_steps = 0;
    for (s, rec) in trace.steps.iter().enumerate() {
        for r in 0..plan.robots.len() {
            let k = &plan.robots[r].knots[s];
            let corrected = rec.residuals.iter().any(|x| x.follower == r);
            if k.event == Event::RegraspFree {
                free_steps += 1;
                assert!(!corrected);
                if r != p.scene.leader {
                    assert_eq!(rec.configs[r], k.config);
                }
            } else if r != p.scene.leader && holds(plan, p.scene.leader, s) {
                assert!(corrected, "step {s} robot {r}");
            }
        }
    }
    assert!(free_steps > 0);
}

#[test]
fn zero_noise_residuals_stay_at_rounding_level() {
    let (p, plan) = desk_low();
    let trace = simulate(&p.scene, plan, &p.grasps, &Disturbance::none()).unwrap();
    let first = trace.steps[0].max_residual();
    for s in &trace.steps {
        let (a, b) = s.max_residual();
        assert!(a <= first.0 + 1e-12 && b <= first.1 + 1e-12);
        assert!(a <= 1e-9 && b <= 1e-9);
    }
    assert_eq!(trace.fault_count(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn chair_plans_hold_their_invariants_for_any_seed(seed in 0u64..1_000) {
        let p = scenarios::chair(true);
        let mut opts = PlanOptions::default();
        opts.coverage.resolution = 101;
        opts.coverage.seed = seed;
        let plan = Planner::new(&p.scene, &p.trajectory, &p.grasps, opts).global_plan().unwrap();
        prop_assert_eq!(plan.regrasp_count(), 0);
        assert_invariants(&p, &plan);
    }
}
