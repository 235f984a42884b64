use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {order} exceeds table capacity {max_order}")]
    OrderTooLarge { order: usize, max_order: usize },

    #[error("degenerate sweep direction: cos(direction, e_d) = {cosine} <= 0")]
    DegenerateDirection { cosine: f64 },

    #[error("no amplitude in the halving ladder certifies within {halvings} halvings")]
    AmplitudeNotCertifiable { halvings: u32 },

    #[error("base cube edge {edge} exceeds the admissible length {max_edge}")]
    EdgeTooLong { edge: f64, max_edge: f64 },

    #[error("invalid problem geometry: {0}")]
    Geometry(String),

    #[error("invalid information operator: {0}")]
    Information(String),

    #[error("adversary construction violated: {0}")]
    Construction(String),

    #[error("homogeneous system has no null vector ({rows} rows, {cols} cols)")]
    NoNullVector { rows: usize, cols: usize },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver budget too small: {0}")]
    BudgetTooSmall(String),

    #[error("exponent fit requires positive values, got {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("exponent fit requires at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("field evaluation failed: {0}")]
    FieldEvaluation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
