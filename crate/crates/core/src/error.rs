use thiserror::Error;

pub type Result<T> = std::result::Result<T, SscError>;

#[derive(Debug, Error)]
pub enum SscError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("zero column at index {0}")]
    ZeroColumn(usize),

    #[error("basis is not orthonormal (max deviation {deviation:.3e})")]
    InvalidBasis { deviation: f64 },

    #[error("iteration limit of {iterations} reached (KKT residual {kkt_residual:.3e})")]
    IterationLimit {
        iterations: usize,
        kkt_residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("infeasible: minimum achievable residual {min_residual:.6e} exceeds target {target:.6e}")]
    Infeasible { min_residual: f64, target: f64 },

    #[error("step-1 optimal value is zero, penalty is undefined")]
    DegenerateStep1,

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("no fixed point: {0}")]
    NoFixedPoint(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("refusing to overwrite {0} (config hash differs, use --force)")]
    WouldOverwrite(String),

    #[error("column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<SscError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SscError {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            SscError::InvalidConfig(_) => "invalid-config",
            SscError::DegenerateInput(_) | SscError::ZeroColumn(_) => "degenerate-input",
            SscError::InvalidBasis { .. } => "invalid-basis",
            SscError::IterationLimit { .. } => "iteration-limit",
            SscError::Infeasible { .. } => "infeasible",
            SscError::DegenerateStep1 => "degenerate-step1",
            SscError::LinearProgram(_) => "linear-program",
            SscError::NoFixedPoint(_) => "no-fixed-point",
            SscError::LengthMismatch { .. } => "length-mismatch",
            SscError::MissingLabels(_) => "missing-labels",
            SscError::Parse { .. } => "parse",
            SscError::WouldOverwrite(_) => "would-overwrite",
            SscError::Column { source, .. } => source.kind(),
            SscError::Io(_) => "io",
            SscError::Json(_) => "json",
        }
    }
}
