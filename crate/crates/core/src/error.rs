use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A source or filter specification violates one of its invariants.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// The closed-form engine only handles Gaussian (or absent) filters.
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    /// The quadratic form of the joint spectrum is degenerate (ab - c^2 <= 0).
    #[error("singular quadratic form: {0}")]
    Singular(String),

    /// Too much of the spectrum sits on the outermost cells of the grid.
    #[error("grid truncation: {fraction:.3e} of the intensity lies in the border cells of the {axis} axis")]
    Truncation { axis: &'static str, fraction: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("spectrum has zero mass")]
    ZeroMass,

    #[error("undefined efficiency: {0}")]
    UndefinedEfficiency(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
