use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("orbital index {index} out of range for n_act = {n_act}")]
    IndexOutOfRange { index: usize, n_act: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(
        "tensor violates declared {class} symmetry: worst deviation {deviation:.3e} at {key:?}"
    )]
    SymmetryViolation {
        class: String,
        key: [usize; 4],
        deviation: f64,
    },

    #[error("geometry series invalid: {0}")]
    InvalidSeries(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {what}")]
    FileFormat {
        path: String,
        line: usize,
        what: String,
    },

    #[error("checkpoint rejected: {0}")]
    CheckpointMismatch(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("effective kernel requested but not present in model")]
    MissingEffectiveKernel,

    #[error("infeasible electron/spin count: n_elec = {n_elec}, ms2 = {ms2}, n_act = {n_act}")]
    InfeasibleSpin {
        n_elec: usize,
        ms2: i32,
        n_act: usize,
    },

    #[error("determinant basis of dimension {dim} exceeds the dense-solver limit {limit}")]
    BasisTooLarge { dim: usize, limit: usize },

    #[error("{algorithm} did not converge within {limit} iterations")]
    NonConvergence {
        algorithm: &'static str,
        limit: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
