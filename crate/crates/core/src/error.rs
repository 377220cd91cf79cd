use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("precision exhausted in {op}: {detail}")]
    PrecisionExhausted { op: &'static str, detail: String },
    #[error("map is singular after inverting p ({0})")]
    SingularMap(String),
    #[error("inclusion violated: {0}")]
    InclusionViolated(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no convergence in {op} after {iterations} iterations")]
    NonConvergence { op: &'static str, iterations: usize },
    #[error("slope factor not defined over the coefficient ring: {0}")]
    FieldTooSmall(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("splitting invalid: {0}")]
    SplittingInvalid(String),
    #[error("no automatic construction available: {0}")]
    NoAutoConstruction(String),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("duality mismatch: {0}")]
    DualityMismatch(String),
    #[error("verification mismatch: {0}")]
    VerificationMismatch(String),
    #[error("certificate invalid: {0}")]
    CertificateInvalid(String),
    #[error("slope symmetry violated: {0}")]
    SlopeSymmetryViolated(String),
    #[error("construction needs p > 2")]
    WrongCharacteristic,
    #[error("series evaluation does not terminate: {0}")]
    NonTermination(String),
    #[error("parse error at {field}: {detail}")]
    Parse { field: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn precision(op: &'static str, detail: impl Into<String>) -> Error {
        Error::PrecisionExhausted { op, detail: detail.into() }
    }

    /// Input errors map to exit code 2, everything else to 1.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::InvalidContext(_) | Error::Shape(_)
        )
    }
}
