use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the growth-rate toolkit.
///
/// Variants split into two families that the command line maps onto
/// distinct exit codes: input problems (configuration, parsing, validation,
/// units) and numeric or domain failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unit mismatch: {0}")]
    Unit(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero size at point {index} (t = {t})")]
    Division { index: usize, t: f64 },

    #[error("size error: {0}")]
    Size(String),

    #[error("singularity at t = {t_star}: {message}")]
    Singularity { t_star: f64, message: String },

    #[error("singular growth rate at t = {t}")]
    SingularRate { t: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("degenerate factors: {0}")]
    DegenerateFactor(String),

    #[error("singular integrand: {0}")]
    SingularIntegrand(String),

    #[error("empty linearization: all {0} points were dropped")]
    EmptyLinearization(usize),

    #[error("collapse at t = {t}: 1 + R*dt = {factor} is not positive")]
    Collapse { t: f64, factor: f64 },

    #[error("t = {t} lies outside the fitted range [{lo}, {hi}]; polynomial rate laws are not extrapolated")]
    RangeRefusal { t: f64, lo: f64, hi: f64 },

    #[error("model is not normalized: {0}")]
    NotNormalized(String),
}

impl Error {
    /// True for errors caused by malformed input or configuration, as opposed
    /// to numeric or domain failures on well-formed input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::Validation(_) | Error::Unit(_) | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
