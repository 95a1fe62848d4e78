use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum LofiError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("lanczos did not converge after {iterations} iterations (residuals {residuals:?})")]
    Convergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("linear component is zero; cannot normalize it")]
    ZeroLinearComponent,

    #[error("spectrum is identically zero")]
    ZeroSpectrum,

    #[error("degenerate features: {0}")]
    DegenerateFeatures(String),

    #[error("unknown tag: {0}")]
    UnknownTag(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl LofiError {
    /// Stable machine-parsable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            LofiError::InvalidInput(_) => "invalid_input",
            LofiError::DimensionMismatch(_) => "dimension_mismatch",
            LofiError::Convergence { .. } => "convergence",
            LofiError::SingularSystem(_) => "singular_system",
            LofiError::NotPsd { .. } => "not_psd",
            LofiError::Format { .. } => "format",
            LofiError::DegenerateLabels(_) => "degenerate_labels",
            LofiError::ZeroLinearComponent => "zero_linear_component",
            LofiError::ZeroSpectrum => "zero_spectrum",
            LofiError::DegenerateFeatures(_) => "degenerate_features",
            LofiError::UnknownTag(_) => "unknown_tag",
            LofiError::Io(_) => "io",
            LofiError::Serde(_) => "serialization",
        }
    }
}

pub type Result<T> = std::result::Result<T, LofiError>;

/// Prefixes an I/O error with the offending path.
pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> LofiError + '_ {
    move |e| LofiError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LofiError::InvalidInput(msg.into()))
}

pub(crate) fn mismatch<T>(msg: impl Into<String>) -> Result<T> {
    Err(LofiError::DimensionMismatch(msg.into()))
}
