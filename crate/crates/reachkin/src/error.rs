//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A quaternion with (near-)zero norm cannot represent a rotation.
    #[error("invalid rotation: quaternion norm {norm} is too small")]
    InvalidRotation { norm: f64 },

    /// Timestamps must strictly increase along a stream.
    #[error("non-monotonic timestamp at sample {index}: {t} does not follow {previous}")]
    NonMonotonicTimestamp { index: usize, t: f64, previous: f64 },

    /// Filter steps are limited to 1 s between frames.
    #[error("time step {dt} s at sample {index} exceeds the 1 s filter limit")]
    TimestepTooLarge { index: usize, dt: f64 },

    /// An operation that needs samples received none.
    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    /// An operation received fewer samples than it needs.
    #[error("{what}: need at least {need} samples, got {got}")]
    TooFewSamples {
        what: &'static str,
        need: usize,
        got: usize,
    },

    /// A numeric argument is outside the operation's domain.
    #[error("domain error: {what}")]
    Domain { what: String },

    /// Two joint-state series do not expose the same joint set.
    #[error("joint-set mismatch: {detail}")]
    JointSetMismatch { detail: String },

    /// A per-task operation is missing trials for some tasks.
    #[error("missing tasks: {0:?}")]
    MissingTasks(Vec<u8>),

    /// Progression scoring requires a baseline series per task.
    #[error("missing baseline for task {task}")]
    MissingBaseline { task: u8 },

    /// Outcome scoring requires both a pre and a post phase per system.
    #[error("missing {phase} trials for system {system}")]
    MissingPhase { system: String, phase: String },

    /// EMG windows carry a fixed channel count.
    #[error("expected {expected} EMG channels, got {got}")]
    ChannelCount { expected: usize, got: usize },

    /// Feature/model dimension disagreement.
    #[error("dimension mismatch: model expects {expected}, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Pooled covariance is singular; shrinkage can repair it.
    #[error("singular covariance matrix; retry with shrinkage lambda > 0")]
    SingularCovariance,

    /// A malformed line in a session or report file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Version string outside the supported major version.
    #[error("unsupported format version {found:?} (reader supports {supported})")]
    UnsupportedVersion { found: String, supported: String },

    /// I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(what: impl Into<String>) -> Self {
        Error::Domain { what: what.into() }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI maps this error to: data errors are 2,
    /// I/O errors are 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
