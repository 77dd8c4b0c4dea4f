use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("undeclared symbol `{name}` at offset {offset}")]
    UndeclaredSymbol { name: String, offset: usize },

    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),

    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },

    #[error("metric is degenerate at the evaluation point (det = {det:e})")]
    DegenerateMetric { det: f64 },

    #[error("signature mismatch: declared ({expected_neg},{expected_pos}), found ({found_neg},{found_pos})")]
    SignatureMismatch {
        expected_neg: usize,
        expected_pos: usize,
        found_neg: usize,
        found_pos: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("|R|^2 vanishes at {point:?}; the manifold behaves as VSI here and the mu-function is undefined")]
    VanishingNorm { point: Vec<f64> },

    #[error("walker frame unavailable: {0}")]
    WalkerFrame(String),

    #[error("quadrature did not converge (error estimate {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("non-finite value on sample grid at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("classification precondition failed: {0}")]
    Classification(String),
}

impl Error {
    /// True for failures that come from numerics or the evaluation domain rather
    /// than from malformed input.
    pub fn is_numeric(&self) -> bool {
        !matches!(
            self,
            Error::Syntax { .. }
                | Error::UndeclaredSymbol { .. }
                | Error::UnboundParameter(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidArgument(_)
        )
    }
}
