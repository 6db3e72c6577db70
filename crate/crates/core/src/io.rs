//! File formats.
//!
//! Every file is a JSON object with `format_version` and `kind`. Scene files
//! are written by people and use meters and degrees. Everything the tools
//! emit uses meters and radians. Floats are printed with 17 significant
//! digits so that a parse/emit cycle is lossless and reruns are
//! byte-identical.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::assign::{Assignment, CoverScheme, RegraspEvent, Segment};
use crate::coverage::{Coverage, Grasp, ObjectTrajectory, ParamIntervalSet, RobotCoverage};
use crate::error::{Error, Result};
use crate::exec::ExecutionTrace;
use crate::geom::Pose;
use crate::model::{ArmConfig, ArmModel, Config, Joint, PlatformBounds, PlatformModel, RobotModel};
use crate::plan::{CheckReport, Diagnostics, Event, Knot, MultiRobotPlan, Pause, RobotTrajectory};
use crate::scenarios::{Expectation, Problem};
use crate::scene::{CapsuleShape, LinkCapsule, ObjectModel, Obstacle, RobotEntry, Scene, DEFAULT_APPROACH_RADIUS, DEFAULT_MARGIN};

pub const FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------- output

struct Fixed17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for Fixed17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{}", fmt_f64(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with fixed float formatting and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Parses `text`, reporting the offending element's path on failure.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let path = if path == "." { "(root)".to_string() } else { path };
        Error::schema(path, inner.to_string())
    })
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    kind: String,
}

/// `kind` of a file, after checking its version.
pub fn kind_of(text: &str) -> Result<String> {
    let h: Header = from_json(text)?;
    if h.format_version != FORMAT_VERSION {
        return Err(Error::schema("format_version", format!("unsupported version {}", h.format_version)));
    }
    Ok(h.kind)
}

fn expect_header(version: u32, kind: &str, want: &str) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::schema("format_version", format!("unsupported version {version}")));
    }
    if kind != want {
        return Err(Error::schema("kind", format!("expected '{want}', found '{kind}'")));
    }
    Ok(())
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn a3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn a6(v: &ArmConfig) -> [f64; 6] {
    [v[0], v[1], v[2], v[3], v[4], v[5]]
}

// ---------------------------------------------------------------- scene

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_approach() -> f64 {
    DEFAULT_APPROACH_RADIUS
}

fn default_theta() -> [f64; 2] {
    [-180.0, 180.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsuleRecord {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkCapsuleRecord {
    pub link: usize,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ObstacleRecord {
    Capsule(CapsuleRecord),
    Box { pose: Pose, half_extents: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub half_extents: [f64; 3],
    #[serde(default)]
    pub capsules: Vec<CapsuleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointRecord {
    pub offset: Pose,
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmRecord {
    pub joints: Vec<JointRecord>,
    pub limits_deg: Vec<[f64; 2]>,
    pub tool: Pose,
}

/// Missing `x` or `y` means unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
    #[serde(default = "default_theta")]
    pub theta_deg: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialRecord {
    /// `x` and `y` in meters, heading in degrees.
    pub platform: [f64; 3],
    pub arm_deg: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotRecord {
    pub name: String,
    pub mount: Pose,
    pub bounds: BoundsRecord,
    pub arm: ArmRecord,
    #[serde(default)]
    pub capsules: Vec<LinkCapsuleRecord>,
    pub initial: InitialRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointRecord {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspRecord {
    pub id: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectRecord {
    pub must_succeed: bool,
    /// `null` for no limit.
    #[serde(default)]
    pub max_regrasps: Option<usize>,
    pub platform_motion_allowed: bool,
}

/// A scene file: robots, object, obstacles, trajectory and grasps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub format_version: u32,
    pub kind: String,
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_approach")]
    pub approach_radius: f64,
    #[serde(default)]
    pub leader: usize,
    pub object: ObjectRecord,
    #[serde(default)]
    pub obstacles: Vec<ObstacleRecord>,
    pub robots: Vec<RobotRecord>,
    pub trajectory: Vec<WaypointRecord>,
    pub grasps: Vec<GraspRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<ExpectRecord>,
}

fn capsule_record(c: &CapsuleShape) -> CapsuleRecord {
    CapsuleRecord {
        a: a3(&c.a),
        b: a3(&c.b),
        radius: c.radius,
    }
}

fn bound(b: [f64; 2]) -> Option<[f64; 2]> {
    (b[0].is_finite() && b[1].is_finite()).then_some(b)
}

impl SceneFile {
    pub fn from_problem(p: &Problem) -> Self {
        let s = &p.scene;
        let robots = s
            .robots
            .iter()
            .map(|e| {
                let m = &e.model;
                RobotRecord {
                    name: m.name.clone(),
                    mount: m.platform.mount,
                    bounds: BoundsRecord {
                        x: bound(m.platform.bounds.x),
                        y: bound(m.platform.bounds.y),
                        theta_deg: m.platform.bounds.theta.map(f64::to_degrees),
                    },
                    arm: ArmRecord {
                        joints: m
                            .arm
                            .joints
                            .iter()
                            .map(|j| JointRecord {
                                offset: j.offset,
                                axis: a3(&j.axis),
                            })
                            .collect(),
                        limits_deg: m.arm.limits.iter().map(|l| l.map(f64::to_degrees)).collect(),
                        tool: m.arm.tool,
                    },
                    capsules: m
                        .capsules
                        .iter()
                        .map(|c| LinkCapsuleRecord {
                            link: c.link,
                            a: a3(&c.shape.a),
                            b: a3(&c.shape.b),
                            radius: c.shape.radius,
                        })
                        .collect(),
                    initial: InitialRecord {
                        platform: [e.initial.platform.x, e.initial.platform.y, e.initial.platform.z.to_degrees()],
                        arm_deg: a6(&e.initial.arm).map(f64::to_degrees),
                    },
                }
            })
            .collect();
        SceneFile {
            format_version: FORMAT_VERSION,
            kind: "scene".into(),
            name: p.name.clone(),
            margin: s.margin,
            approach_radius: s.approach_radius,
            leader: s.leader,
            object: ObjectRecord {
                half_extents: a3(&s.object.half_extents),
                capsules: s.object.capsules.iter().map(capsule_record).collect(),
            },
            obstacles: s
                .obstacles
                .iter()
                .map(|o| match o {
                    Obstacle::Capsule(c) => ObstacleRecord::Capsule(capsule_record(c)),
                    Obstacle::Box { pose, half_extents } => ObstacleRecord::Box {
                        pose: *pose,
                        half_extents: a3(half_extents),
                    },
                })
                .collect(),
            robots,
            trajectory: p
                .trajectory
                .waypoints()
                .iter()
                .map(|(t, pose)| WaypointRecord { t: *t, pose: *pose })
                .collect(),
            grasps: p
                .grasps
                .iter()
                .map(|g| GraspRecord {
                    id: g.id.clone(),
                    pose: g.relative,
                })
                .collect(),
            expect: Some(ExpectRecord {
                must_succeed: p.expect.must_succeed,
                max_regrasps: (p.expect.max_regrasps != usize::MAX).then_some(p.expect.max_regrasps),
                platform_motion_allowed: p.expect.platform_motion_allowed,
            }),
        }
    }

    /// Validates and converts to the internal (radian) representation.
    pub fn into_problem(self) -> Result<Problem> {
        expect_header(self.format_version, &self.kind, "scene")?;
        let finite = |path: String, vals: &[f64]| -> Result<()> {
            if vals.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::schema(path, "values must be finite"))
            }
        };
        let capsule = |path: String, c: &CapsuleRecord| -> Result<CapsuleShape> {
            finite(path.clone(), &[c.a, c.b].concat())?;
            if !(c.radius >= 0.0) {
                return Err(Error::schema(format!("{path}.radius"), "radius must be nonnegative"));
            }
            Ok(CapsuleShape::new(v3(c.a), v3(c.b), c.radius))
        };
        if !(self.margin >= 0.0) {
            return Err(Error::schema("margin", "must be nonnegative"));
        }
        if !(self.approach_radius > 0.0) {
            return Err(Error::schema("approach_radius", "must be positive"));
        }
        if self.robots.is_empty() {
            return Err(Error::schema("robots", "at least one robot is required"));
        }
        if self.leader >= self.robots.len() {
            return Err(Error::schema("leader", format!("index {} out of range", self.leader)));
        }
        let mut robots = Vec::with_capacity(self.robots.len());
        for (i, r) in self.robots.iter().enumerate() {
            let p = format!("robots[{i}]");
            if r.arm.joints.len() != 6 {
                return Err(Error::schema(format!("{p}.arm.joints"), format!("expected 6 joints, found {}", r.arm.joints.len())));
            }
            if r.arm.limits_deg.len() != 6 {
                return Err(Error::schema(format!("{p}.arm.limits_deg"), format!("expected 6 limits, found {}", r.arm.limits_deg.len())));
            }
            let mut joints = Vec::with_capacity(6);
            for (k, j) in r.arm.joints.iter().enumerate() {
                let axis = v3(j.axis);
                let n = axis.norm();
                if !n.is_finite() || n < 1e-9 {
                    return Err(Error::schema(format!("{p}.arm.joints[{k}].axis"), "axis must be a nonzero vector"));
                }
                joints.push(Joint {
                    offset: j.offset,
                    axis: axis / n,
                });
            }
            for (k, l) in r.arm.limits_deg.iter().enumerate() {
                if !(l[0] <= l[1]) {
                    return Err(Error::schema(format!("{p}.arm.limits_deg[{k}]"), "lower limit exceeds upper"));
                }
            }
            let limits = r.arm.limits_deg.iter().map(|l| l.map(f64::to_radians)).collect();
            let arm = ArmModel::new(joints, limits, r.arm.tool).map_err(|e| Error::schema(format!("{p}.arm"), e.to_string()))?;
            let range = |path: &str, b: Option<[f64; 2]>| -> Result<[f64; 2]> {
                match b {
                    None => Ok([f64::NEG_INFINITY, f64::INFINITY]),
                    Some(b) if b[0] <= b[1] => Ok(b),
                    Some(_) => Err(Error::schema(format!("{p}.bounds.{path}"), "lower bound exceeds upper")),
                }
            };
            let th = r.bounds.theta_deg;
            if !(th[0] <= th[1]) {
                return Err(Error::schema(format!("{p}.bounds.theta_deg"), "lower bound exceeds upper"));
            }
            let bounds = PlatformBounds {
                x: range("x", r.bounds.x)?,
                y: range("y", r.bounds.y)?,
                theta: th.map(f64::to_radians),
            };
            let mut capsules = Vec::with_capacity(r.capsules.len());
            for (k, c) in r.capsules.iter().enumerate() {
                if c.link > 6 {
                    return Err(Error::schema(format!("{p}.capsules[{k}].link"), "link index must be 0..=6"));
                }
                let shape = capsule(
                    format!("{p}.capsules[{k}]"),
                    &CapsuleRecord {
                        a: c.a,
                        b: c.b,
                        radius: c.radius,
                    },
                )?;
                capsules.push(LinkCapsule { link: c.link, shape });
            }
            finite(format!("{p}.initial"), &[r.initial.platform.as_slice(), r.initial.arm_deg.as_slice()].concat())?;
            let ip = r.initial.platform;
            let initial = Config::new(
                Vector3::new(ip[0], ip[1], ip[2].to_radians()),
                ArmConfig::from_iterator(r.initial.arm_deg.iter().map(|d| d.to_radians())),
            );
            let model = RobotModel {
                name: r.name.clone(),
                platform: PlatformModel { mount: r.mount, bounds },
                arm,
                capsules,
            };
            robots.push(RobotEntry { model, initial });
        }
        let mut object_capsules = Vec::new();
        for (k, c) in self.object.capsules.iter().enumerate() {
            object_capsules.push(capsule(format!("object.capsules[{k}]"), c)?);
        }
        let mut obstacles = Vec::new();
        for (k, o) in self.obstacles.iter().enumerate() {
            obstacles.push(match o {
                ObstacleRecord::Capsule(c) => Obstacle::Capsule(capsule(format!("obstacles[{k}].capsule"), c)?),
                ObstacleRecord::Box { pose, half_extents } => {
                    if half_extents.iter().any(|h| !(*h >= 0.0)) {
                        return Err(Error::schema(format!("obstacles[{k}].box.half_extents"), "must be nonnegative"));
                    }
                    Obstacle::Box {
                        pose: *pose,
                        half_extents: v3(*half_extents),
                    }
                }
            });
        }
        let trajectory = ObjectTrajectory::new(self.trajectory.iter().map(|w| (w.t, w.pose)).collect()).map_err(|e| {
            let msg = match e {
                Error::Precondition(m) => m,
                other => other.to_string(),
            };
            Error::schema("trajectory", msg)
        })?;
        let mut grasps: Vec<Grasp> = Vec::with_capacity(self.grasps.len());
        for (k, g) in self.grasps.iter().enumerate() {
            if grasps.iter().any(|h| h.id == g.id) {
                return Err(Error::schema(format!("grasps[{k}].id"), format!("duplicate grasp id '{}'", g.id)));
            }
            grasps.push(Grasp {
                id: g.id.clone(),
                relative: g.pose,
            });
        }
        let expect = match &self.expect {
            Some(e) => Expectation {
                must_succeed: e.must_succeed,
                max_regrasps: e.max_regrasps.unwrap_or(usize::MAX),
                platform_motion_allowed: e.platform_motion_allowed,
            },
            None => Expectation {
                must_succeed: true,
                max_regrasps: usize::MAX,
                platform_motion_allowed: true,
            },
        };
        Ok(Problem {
            name: self.name,
            scene: Scene {
                robots,
                object: ObjectModel {
                    half_extents: v3(self.object.half_extents),
                    capsules: object_capsules,
                },
                obstacles,
                leader: self.leader,
                margin: self.margin,
                approach_radius: self.approach_radius,
            },
            trajectory,
            grasps,
            expect,
        })
    }
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    from_json::<SceneFile>(text)?.into_problem()
}

pub fn read_problem(path: &Path) -> Result<Problem> {
    parse_problem(&std::fs::read_to_string(path)?)
}

pub fn problem_json(p: &Problem) -> Result<String> {
    to_json(&SceneFile::from_problem(p))
}

// ---------------------------------------------------------------- coverage

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCoverageRecord {
    pub id: String,
    pub intervals: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotCoverageRecord {
    pub robot: usize,
    pub grasps: Vec<GraspCoverageRecord>,
    pub union: Vec<[f64; 2]>,
    pub gaps: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageFile {
    pub format_version: u32,
    pub kind: String,
    pub resolution: usize,
    pub covers_all: bool,
    pub robots: Vec<RobotCoverageRecord>,
}

fn pairs(s: &ParamIntervalSet) -> Vec<[f64; 2]> {
    s.intervals().iter().map(|&(a, b)| [a, b]).collect()
}

impl CoverageFile {
    pub fn from_coverage(c: &Coverage) -> Self {
        CoverageFile {
            format_version: FORMAT_VERSION,
            kind: "coverage".into(),
            resolution: c.resolution,
            covers_all: c.covers_all(),
            robots: c
                .robots
                .iter()
                .map(|r| RobotCoverageRecord {
                    robot: r.robot,
                    grasps: r
                        .per_grasp
                        .iter()
                        .map(|(id, s)| GraspCoverageRecord {
                            id: id.clone(),
                            intervals: pairs(s),
                        })
                        .collect(),
                    union: pairs(&r.union),
                    gaps: r.union.gaps().into_iter().map(|(a, b)| [a, b]).collect(),
                })
                .collect(),
        }
    }

    /// The coverable sets without IK witnesses.
    pub fn into_coverage(self) -> Result<Coverage> {
        expect_header(self.format_version, &self.kind, "coverage")?;
        let set = |v: &[[f64; 2]]| ParamIntervalSet::from_intervals(v.iter().map(|p| (p[0], p[1])));
        Ok(Coverage {
            resolution: self.resolution,
            robots: self
                .robots
                .iter()
                .map(|r| {
                    let per_grasp: Vec<(String, ParamIntervalSet)> =
                        r.grasps.iter().map(|g| (g.id.clone(), set(&g.intervals))).collect();
                    let union = per_grasp.iter().fold(ParamIntervalSet::empty(), |u, (_, s)| u.union(s));
                    RobotCoverage {
                        robot: r.robot,
                        witnesses: vec![Vec::new(); per_grasp.len()],
                        per_grasp,
                        union,
                    }
                })
                .collect(),
        })
    }
}

// ---------------------------------------------------------------- assignment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub grasp: String,
    pub interval: [f64; 2],
    pub active: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRecord {
    pub robot: usize,
    pub segments: Vec<SegmentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegraspRecord {
    pub robot: usize,
    pub t: f64,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub rank: usize,
    pub optimal: bool,
    pub regrasp_count: usize,
    pub schemes: Vec<SchemeRecord>,
    pub regrasps: Vec<RegraspRecord>,
}

impl From<&Assignment> for AssignmentRecord {
    fn from(a: &Assignment) -> Self {
        AssignmentRecord {
            rank: a.rank,
            optimal: a.optimal,
            regrasp_count: a.regrasp_count(),
            schemes: a
                .schemes
                .iter()
                .map(|s| SchemeRecord {
                    robot: s.owner,
                    segments: s
                        .segments
                        .iter()
                        .map(|g| SegmentRecord {
                            grasp: g.grasp.clone(),
                            interval: [g.interval.0, g.interval.1],
                            active: [g.active.0, g.active.1],
                        })
                        .collect(),
                })
                .collect(),
            regrasps: a
                .regrasps
                .iter()
                .map(|r| RegraspRecord {
                    robot: r.robot,
                    t: r.t,
                    from: r.from.clone(),
                    to: r.to.clone(),
                })
                .collect(),
        }
    }
}

impl AssignmentRecord {
    fn to_assignment(&self, path: &str) -> Result<Assignment> {
        for (i, s) in self.schemes.iter().enumerate() {
            if s.segments.is_empty() {
                return Err(Error::schema(format!("{path}schemes[{i}].segments"), "scheme has no segments"));
            }
        }
        Ok(Assignment {
            schemes: self
                .schemes
                .iter()
                .map(|s| CoverScheme {
                    owner: s.robot,
                    segments: s
                        .segments
                        .iter()
                        .map(|g| Segment {
                            grasp: g.grasp.clone(),
                            interval: (g.interval[0], g.interval[1]),
                            active: (g.active[0], g.active[1]),
                        })
                        .collect(),
                })
                .collect(),
            regrasps: self
                .regrasps
                .iter()
                .map(|r| RegraspEvent {
                    robot: r.robot,
                    t: r.t,
                    from: r.from.clone(),
                    to: r.to.clone(),
                })
                .collect(),
            optimal: self.optimal,
            rank: self.rank,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub format_version: u32,
    pub kind: String,
    #[serde(flatten)]
    pub assignment: AssignmentRecord,
}

impl AssignmentFile {
    pub fn from_assignment(a: &Assignment) -> Self {
        AssignmentFile {
            format_version: FORMAT_VERSION,
            kind: "assignment".into(),
            assignment: a.into(),
        }
    }

    pub fn into_assignment(self) -> Result<Assignment> {
        expect_header(self.format_version, &self.kind, "assignment")?;
        self.assignment.to_assignment("")
    }
}

// ---------------------------------------------------------------- plan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub platform: [f64; 3],
    pub arm: [f64; 6],
}

impl From<&Config> for ConfigRecord {
    fn from(c: &Config) -> Self {
        ConfigRecord {
            platform: a3(&c.platform),
            arm: a6(&c.arm),
        }
    }
}

impl From<&ConfigRecord> for Config {
    fn from(c: &ConfigRecord) -> Self {
        Config::new(v3(c.platform), ArmConfig::from_column_slice(&c.arm))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotRecord {
    pub t: f64,
    pub platform: [f64; 3],
    pub arm: [f64; 6],
    pub grasp: Option<String>,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotPlanRecord {
    pub robot: usize,
    pub xi: f64,
    pub knots: Vec<KnotRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauseRecord {
    pub robot: usize,
    pub t: f64,
    pub steps: [usize; 2],
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub assignment_rank: usize,
    pub failures: Vec<String>,
    pub transits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub length: String,
    pub angle: String,
}

impl Units {
    fn si() -> Self {
        Units {
            length: "m".into(),
            angle: "rad".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub format_version: u32,
    pub kind: String,
    pub units: Units,
    pub steps: usize,
    pub regrasp_count: usize,
    pub assignment: AssignmentRecord,
    pub pauses: Vec<PauseRecord>,
    pub diagnostics: DiagnosticsRecord,
    pub robots: Vec<RobotPlanRecord>,
}

impl PlanFile {
    pub fn from_plan(p: &MultiRobotPlan) -> Self {
        PlanFile {
            format_version: FORMAT_VERSION,
            kind: "plan".into(),
            units: Units::si(),
            steps: p.steps(),
            regrasp_count: p.regrasp_count(),
            assignment: (&p.assignment).into(),
            pauses: p
                .pauses
                .iter()
                .map(|q| PauseRecord {
                    robot: q.robot,
                    t: q.t,
                    steps: [q.steps.0, q.steps.1],
                    from: q.from.clone(),
                    to: q.to.clone(),
                })
                .collect(),
            diagnostics: DiagnosticsRecord {
                assignment_rank: p.diagnostics.assignment_rank,
                failures: p.diagnostics.failures.clone(),
                transits: p.diagnostics.transits.clone(),
            },
            robots: p
                .robots
                .iter()
                .map(|r| RobotPlanRecord {
                    robot: r.robot,
                    xi: r.xi,
                    knots: r
                        .knots
                        .iter()
                        .map(|k| KnotRecord {
                            t: k.t,
                            platform: a3(&k.config.platform),
                            arm: a6(&k.config.arm),
                            grasp: k.grasp.clone(),
                            event: k.event.as_str().into(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn into_plan(self) -> Result<MultiRobotPlan> {
        expect_header(self.format_version, &self.kind, "plan")?;
        if self.units != Units::si() {
            return Err(Error::schema("units", "plan files use meters and radians"));
        }
        let mut robots = Vec::with_capacity(self.robots.len());
        for (i, r) in self.robots.iter().enumerate() {
            let mut knots = Vec::with_capacity(r.knots.len());
            for (k, kn) in r.knots.iter().enumerate() {
                let event = Event::parse(&kn.event)
                    .ok_or_else(|| Error::schema(format!("robots[{i}].knots[{k}].event"), format!("unknown event '{}'", kn.event)))?;
                knots.push(Knot {
                    t: kn.t,
                    config: Config::new(v3(kn.platform), ArmConfig::from_column_slice(&kn.arm)),
                    grasp: kn.grasp.clone(),
                    event,
                });
            }
            robots.push(RobotTrajectory {
                robot: r.robot,
                knots,
                xi: r.xi,
            });
        }
        Ok(MultiRobotPlan {
            robots,
            pauses: self
                .pauses
                .iter()
                .map(|q| Pause {
                    robot: q.robot,
                    t: q.t,
                    steps: (q.steps[0], q.steps[1]),
                    from: q.from.clone(),
                    to: q.to.clone(),
                })
                .collect(),
            assignment: self.assignment.to_assignment("assignment.")?,
            diagnostics: Diagnostics {
                assignment_rank: self.diagnostics.assignment_rank,
                failures: self.diagnostics.failures,
                transits: self.diagnostics.transits,
            },
        })
    }
}

pub fn plan_json(p: &MultiRobotPlan) -> Result<String> {
    to_json(&PlanFile::from_plan(p))
}

pub fn parse_plan(text: &str) -> Result<MultiRobotPlan> {
    from_json::<PlanFile>(text)?.into_plan()
}

pub const PLAN_CSV_HEADER: [&str; 13] = [
    "robot", "t", "x", "y", "theta", "j1", "j2", "j3", "j4", "j5", "j6", "grasp_id", "event",
];

/// One row per knot per robot, robot-major.
pub fn write_plan_csv<W: Write>(p: &MultiRobotPlan, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PLAN_CSV_HEADER).map_err(csv_err)?;
    for r in &p.robots {
        for k in &r.knots {
            let mut row = vec![r.robot.to_string(), fmt_f64(k.t)];
            row.extend(a3(&k.config.platform).iter().map(|v| fmt_f64(*v)));
            row.extend(a6(&k.config.arm).iter().map(|v| fmt_f64(*v)));
            row.push(k.grasp.clone().unwrap_or_default());
            row.push(k.event.as_str().into());
            out.write_record(&row).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

// ---------------------------------------------------------------- check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub step: usize,
    pub robot: usize,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFile {
    pub format_version: u32,
    pub kind: String,
    pub pass: bool,
    pub max_tracking: [f64; 2],
    pub max_drift: [f64; 2],
    pub violations: Vec<ViolationRecord>,
}

impl CheckFile {
    pub fn from_report(r: &CheckReport) -> Self {
        CheckFile {
            format_version: FORMAT_VERSION,
            kind: "check".into(),
            pass: r.pass,
            max_tracking: [r.max_tracking.0, r.max_tracking.1],
            max_drift: [r.max_drift.0, r.max_drift.1],
            violations: r
                .violations
                .iter()
                .map(|v| ViolationRecord {
                    step: v.step,
                    robot: v.robot,
                    kind: format!("{:?}", v.kind),
                    detail: v.detail.clone(),
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------- trace

/// Lossless pose: row-major rotation matrix and translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&Pose> for MatrixPose {
    fn from(p: &Pose) -> Self {
        let r = &p.rotation;
        MatrixPose {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: a3(&p.translation),
        }
    }
}

impl From<&MatrixPose> for Pose {
    fn from(m: &MatrixPose) -> Self {
        let r = m.rotation;
        Pose::new(
            nalgebra::Matrix3::new(r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]),
            v3(m.translation),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceRecord {
    pub sigma_p: f64,
    pub sigma_m: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub reference: usize,
    pub follower: usize,
    pub translation: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFileRecord {
    pub step: usize,
    pub t: f64,
    pub configs: Vec<ConfigRecord>,
    pub object: Option<MatrixPose>,
    pub residuals: Vec<ResidualRecord>,
    pub faults: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub step: usize,
    pub platform: [f64; 3],
    pub arm: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub max_residual: [f64; 2],
    pub mean_residual: [f64; 2],
    pub fault_count: usize,
    /// Fraction of steps with residual within 1 mm and 2 mrad.
    pub within_1mm_2mrad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub format_version: u32,
    pub kind: String,
    pub units: Units,
    pub leader: usize,
    pub disturbance: DisturbanceRecord,
    pub summary: TraceSummary,
    pub steps: Vec<StepFileRecord>,
    pub disturbances: Vec<NoiseRecord>,
}

impl TraceFile {
    pub fn from_trace(t: &ExecutionTrace) -> Self {
        let (mt, mr) = t.max_residual();
        let (at, ar) = t.mean_residual();
        TraceFile {
            format_version: FORMAT_VERSION,
            kind: "trace".into(),
            units: Units::si(),
            leader: t.leader,
            disturbance: DisturbanceRecord {
                sigma_p: t.disturbance.sigma_p,
                sigma_m: t.disturbance.sigma_m,
                seed: t.disturbance.seed,
            },
            summary: TraceSummary {
                steps: t.steps.len(),
                max_residual: [mt, mr],
                mean_residual: [at, ar],
                fault_count: t.fault_count(),
                within_1mm_2mrad: t.fraction_within(1e-3, 2e-3),
            },
            steps: t
                .steps
                .iter()
                .map(|s| StepFileRecord {
                    step: s.step,
                    t: s.t,
                    configs: s.configs.iter().map(ConfigRecord::from).collect(),
                    object: s.object.as_ref().map(MatrixPose::from),
                    residuals: s
                        .residuals
                        .iter()
                        .map(|r| ResidualRecord {
                            reference: r.reference,
                            follower: r.follower,
                            translation: r.translation,
                            rotation: r.rotation,
                        })
                        .collect(),
                    faults: s.faults.clone(),
                })
                .collect(),
            disturbances: t
                .log
                .iter()
                .map(|d| NoiseRecord {
                    step: d.step,
                    platform: a3(&d.platform),
                    arm: a6(&d.arm),
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: TraceFile = from_json(text)?;
        expect_header(f.format_version, &f.kind, "trace")?;
        Ok(f)
    }
}

pub const TRACE_CSV_HEADER: [&str; 15] = [
    "robot", "step", "t", "x", "y", "theta", "j1", "j2", "j3", "j4", "j5", "j6", "residual_m", "residual_rad", "fault",
];

/// One row per step per robot, robot-major. Residual columns are empty for
/// robots without a correction at that step.
pub fn write_trace_csv<W: Write>(t: &TraceFile, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_CSV_HEADER).map_err(csv_err)?;
    let robots = t.steps.first().map_or(0, |s| s.configs.len());
    for r in 0..robots {
        for s in &t.steps {
            let c = &s.configs[r];
            let mut row = vec![r.to_string(), s.step.to_string(), fmt_f64(s.t)];
            row.extend(c.platform.iter().chain(c.arm.iter()).map(|v| fmt_f64(*v)));
            match s.residuals.iter().find(|x| x.follower == r) {
                Some(x) => {
                    row.push(fmt_f64(x.translation));
                    row.push(fmt_f64(x.rotation));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
            row.push(u8::from(s.faults.contains(&r)).to_string());
            out.write_record(&row).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}
