use std::path::PathBuf;

use thiserror::Error;

use crate::kinematics::TreeDiagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation angle {angle:.9} is too close to pi for a principal logarithm")]
    AngleNearPi { angle: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("joint of part `{part}` expects {expected} coordinates, got {got}")]
    DofMismatch {
        part: String,
        expected: usize,
        got: usize,
    },

    #[error("joint coordinate {dof} of part `{part}` is {value}, outside [{lo}, {hi}]")]
    LimitViolation {
        part: String,
        dof: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid joint specification: {0}")]
    InvalidJoint(String),

    #[error("pose has no joint value for part `{0}`")]
    MissingJointValue(String),

    #[error("unknown part `{0}`")]
    UnknownPart(String),

    #[error("invalid kinematic tree: {}", format_diagnostics(.0))]
    InvalidTree(Vec<TreeDiagnostic>),

    #[error("part `{0}` has no source parent mesh to build a reference VDF")]
    MissingSourceParent(String),

    #[error("normal matrix is singular; rho must be positive")]
    SingularSystem,

    #[error("the chain from the root to part `{0}` has no degrees of freedom")]
    NoDofOnChain(String),

    #[error("every score candidate has zero density weight")]
    AllWeightsZero,

    #[error("scene has no ground contact along the gravity direction")]
    NoGroundContact,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("part `{part}`: {source}")]
    InPart {
        part: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_part(self, part: &str) -> Self {
        match self {
            Error::InPart { .. } => self,
            other => Error::InPart {
                part: part.to_owned(),
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, looking through part-context wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::InPart { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

fn format_diagnostics(diags: &[TreeDiagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
