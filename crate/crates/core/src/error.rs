use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{field}`: {constraint} (got {value})")]
    InvalidParameter {
        field: &'static str,
        constraint: String,
        value: String,
    },

    #[error(
        "insufficient history: need snapshots covering [{need_from}, {need_to}], \
         buffer covers [{have_from}, {have_to}]"
    )]
    InsufficientHistory {
        need_from: f64,
        need_to: f64,
        have_from: f64,
        have_to: f64,
    },

    #[error(
        "divergent trace: Tr(Λ^{exponent_power} GG*) tail exponent {tail_exponent} >= -2 \
         (smoothing margin {smoothing_margin})"
    )]
    DivergentTrace {
        exponent_power: f64,
        tail_exponent: f64,
        smoothing_margin: f64,
    },

    #[error("degenerate noise mode k = ({k1}, {k2}): sigma_k = 0 inside the projection ball")]
    DegenerateMode { k1: i32, k2: i32 },

    #[error("blow-up at t = {t} (step {step}): {reason}")]
    BlowUp { t: f64, step: u64, reason: String },

    #[error("ensemble too small: got {got}, need at least {need}")]
    EnsembleTooSmall { got: usize, need: usize },

    #[error("series not positive at index {index} (value {value})")]
    NonPositiveSeries { index: usize, value: f64 },

    #[error("snapshot format: {0}")]
    Snapshot(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, constraint: impl Into<String>, value: impl ToString) -> Self {
        Error::InvalidParameter {
            field,
            constraint: constraint.into(),
            value: value.to_string(),
        }
    }
}
