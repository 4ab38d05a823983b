use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("system `{system}` has no parameter `{key}`")]
    UnknownParameter { system: String, key: String },
    #[error("parameter `{key}` must be finite, got {value}")]
    NonFiniteParameter { key: String, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("blow-up at t = {t}")]
    BlowUp { t: f64 },
    #[error("stiffness failure at t = {t}: step size underflow")]
    StiffnessFailure { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("singular monodromy: eigenvalue modulus {modulus:e}")]
    SingularMonodromy { modulus: f64 },
    #[error("degenerate projection: rank < 2")]
    DegenerateProjection,
    #[error("comparison span {span} is shorter than one period {period}")]
    ShortComparisonSpan { span: f64, period: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
