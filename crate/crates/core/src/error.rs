use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("division by a quaternion of norm {norm:e}")]
    DivisionByZero { norm: f64 },

    #[error("rotation axis must be a unit pure quaternion (norm {norm}, scalar part {scalar})")]
    InvalidAxis { norm: f64, scalar: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not self-adjoint (max deviation {deviation:e})")]
    NotSelfAdjoint { deviation: f64 },

    #[error("matrix is not normal (commutator norm {deviation:e})")]
    NotNormal { deviation: f64 },

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("eigenvector recovery failed: residual {residual:e} exceeds {tolerance:e}")]
    RecoveryFailed { residual: f64, tolerance: f64 },

    #[error("vector {index} is linearly dependent on its predecessors (residual norm {norm:e})")]
    RankDeficient { index: usize, norm: f64 },

    #[error("invalid quadrature grid: {0}")]
    InvalidGrid(String),

    #[error("point {point:?} lies outside the domain [-{tau}, {tau}]^d")]
    OutsideDomain { point: Vec<f64>, tau: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel admissibility failed: {0}")]
    Inadmissible(String),

    #[error("mode {index} out of range ({count} retained)")]
    ModeOutOfRange { index: usize, count: usize },

    #[error("eigenvalue of mode {index} is below the inversion threshold (|lambda| = {norm:e})")]
    SingularMode { index: usize, norm: f64 },

    #[error("kernel {0} has no known orthonormal sampling lattice")]
    NoLattice(String),

    #[error("signal has zero norm")]
    ZeroNorm,

    #[error("point {point:?} lies outside the tabulated range")]
    OutsideTable { point: Vec<f64> },

    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
