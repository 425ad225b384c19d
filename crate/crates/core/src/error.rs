use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("subsystem index {index} out of range for {len} subsystems")]
    MaskOutOfRange { index: usize, len: usize },

    #[error("operator is not hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("not a density operator: {0}")]
    NotDensity(String),

    #[error("map is not an isometry (deviation {0:.3e})")]
    NotIsometry(f64),

    #[error("invalid Kraus decomposition: {0}")]
    InvalidKraus(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("observable spectrum outside [-1, 1]: {0}")]
    SpectrumOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "state is not NPT-certifiable (minimum partial-transpose eigenvalue {min_eigenvalue:.3e})"
    )]
    NotNptCertifiable { min_eigenvalue: f64 },

    #[error("target state is not genuinely multipartite entangled: {0}")]
    NotGme(String),

    #[error("behavior is missing entries: {0}")]
    MissingEntries(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
