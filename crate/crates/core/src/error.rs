use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-manifold edge ({0}, {1}) is shared by more than two triangles")]
    NonManifold(usize, usize),
    #[error("mesh is not orientable")]
    NonOrientable,
    #[error("face at line {line} has {count} vertices, only triangles are supported")]
    NonTriangle { line: usize, count: usize },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("mesh has {0} connected components, a connected surface is required")]
    DisconnectedMesh(usize),
    #[error("unsupported space combination: {0}")]
    UnsupportedCombination(String),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter must be positive: {0}")]
    NonpositiveParameter(&'static str),
    #[error("advecting field is not divergence free (relative divergence {0:e})")]
    NotDivergenceFree(f64),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("harmonic basis construction exceeded {attempts} attempts with {accepted} of {wanted} fields")]
    MaxAttemptsExceeded { attempts: usize, accepted: usize, wanted: usize },
    #[error("harmonic basis does not match the space: {0}")]
    BasisMismatch(String),
    #[error("Schur complement is numerically singular")]
    SingularSchur,
    #[error("operator is singular: {0}")]
    SingularOperator(String),
    #[error("non-finite value detected at step {0}")]
    NanDetected(usize),
    #[error("wrong degree: {0}")]
    WrongDegree(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
