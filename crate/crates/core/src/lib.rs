//! Kinematic planning for several mobile manipulators that rigidly co-grasp
//! one object and carry it along a prescribed SE(3) trajectory.
//!
//! The pipeline is:
//!
//! 1. [`coverage::ik_check`] finds, per robot and grasp, the trajectory
//!    parameters at which the grasp is kinematically realizable.
//! 2. [`assign`] picks the cover schemes with the fewest regrasps, keeping
//!    simultaneous grasps distinct across robots.
//! 3. [`plan::global_plan`] turns the assignment into per-robot
//!    configuration trajectories, moving platforms when the arm alone loses
//!    connectivity and regrasping at the scheme's handover points.
//! 4. [`exec::simulate`] replays a plan with a disturbed leader and
//!    corrected followers.
//!
//! See the guide in `book/` for a walk-through.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assign;
pub mod coverage;
pub mod error;
pub mod exec;
pub mod geom;
pub mod io;
pub mod model;
pub mod plan;
pub mod scenarios;
pub mod scene;

pub use error::{Error, Result};
pub use geom::Pose;
pub use model::{ArmConfig, Config, RobotModel};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/poses.md")]
    mod poses {}
    #[doc = include_str!("../../../book/src/kinematics.md")]
    mod kinematics {}
    #[doc = include_str!("../../../book/src/coverage.md")]
    mod coverage {}
    #[doc = include_str!("../../../book/src/assignment.md")]
    mod assignment {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/execution.md")]
    mod execution {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
}
