use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value} outside [0, 1]")]
    ParameterOutOfRange { value: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Schema or semantic error in an input file; `path` names the offending
    /// element, e.g. `robots[1].joints[3].axis`.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Some robot has trajectory parameters that no grasp can realize.
    #[error("trajectory not coverable: robot {robot} has no feasible grasp on {gaps:?}")]
    NotCoverable { robot: usize, gaps: Vec<(f64, f64)> },

    /// The union of the grasp sets leaves parts of `[0, 1]` uncovered.
    #[error("grasp sets leave {gaps:?} uncovered")]
    NoCover { gaps: Vec<(f64, f64)> },

    #[error("no combination of cover schemes satisfies the distinct-grasp constraint")]
    AssignmentInfeasible,

    #[error("coordinated platform planning stalled at t = {reached}: {reason}")]
    SegmentFailure { reached: f64, reason: String },

    #[error("regrasp infeasible: {0}")]
    RegraspInfeasible(String),

    #[error("planner failed after {} attempt(s): {}", attempts.len(), attempts.join("; "))]
    PlannerFailure { attempts: Vec<String> },

    #[error("follower correction infeasible")]
    CorrectionInfeasible,

    #[error("unknown format '{0}'")]
    UnknownFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Infeasibility (as opposed to bad input) is reported with exit code 2
    /// by the command-line front end.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::NotCoverable { .. }
                | Error::NoCover { .. }
                | Error::AssignmentInfeasible
                | Error::PlannerFailure { .. }
                | Error::SegmentFailure { .. }
                | Error::RegraspInfeasible(_)
        )
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
