use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pole of {function} at {at}")]
    Pole { function: &'static str, at: String },

    #[error("domain error in {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    #[error("division by a jet with zero constant term")]
    SingularJet,

    #[error("composition requires an inner jet with zero constant term")]
    Composition,

    #[error("degenerate hypergeometric transformation: {0}")]
    DegenerateTransformation(String),

    #[error("no T1 candidate reached |C(T1)|*T >= {threshold} (best {best:.3e})")]
    SelectionFailure { threshold: f64, best: f64 },

    #[error("reduction to the fundamental domain did not terminate after {0} steps")]
    ReductionFailure(usize),

    #[error("insufficient Fourier coefficients: need {required}, have {available}")]
    InsufficientCoefficients { required: usize, available: usize },

    #[error("invalid form file: {0}")]
    Load(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grouping contract violated: member not in U_delta of its representative")]
    GroupingContract,

    #[error("result magnitude e^{0:.1} overflows binary64; rerun with extended precision or smaller T")]
    PrecisionRequired(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
