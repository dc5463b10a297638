use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration too large: m = {m} exceeds the cap of {cap}")]
    EnumerationTooLarge { m: usize, cap: usize },

    #[error("no exact-margin witness: Gram matrix is singular")]
    SingularGram,

    #[error("exact MEM limited to m <= {cap} (got m = {m}); use mem_fit_heuristic")]
    ExactCapExceeded { m: usize, cap: usize },

    #[error("adversarial construction unavailable: sample is not {gamma}-shattered at the origin")]
    NotShattered { gamma: f64 },

    #[error("t = {t} outside the admissible range (0, {max}]")]
    MgfRange { t: f64, max: f64 },

    #[error("not a sub-Gaussian product distribution: {0}")]
    NotSubGaussian(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpectrum(_) => "invalid_spectrum",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::EnumerationTooLarge { .. } => "enumeration_too_large",
            Error::SingularGram => "singular_gram",
            Error::ExactCapExceeded { .. } => "exact_cap_exceeded",
            Error::NotShattered { .. } => "not_shattered",
            Error::MgfRange { .. } => "mgf_range",
            Error::NotSubGaussian(_) => "not_sub_gaussian",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
