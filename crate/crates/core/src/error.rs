use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scheme capacity exceeded: {scheme} with {modulation} needs N >= {required}, got N = {n}")]
    Capacity {
        scheme: String,
        modulation: String,
        required: usize,
        n: usize,
    },
    #[error("cyclic prefix too short: {cp_len} samples < delay spread of {delay_spread} samples")]
    CpTooShort { cp_len: usize, delay_spread: usize },
    #[error("reflection coefficient of device {device} has |alpha| = {magnitude} > 1")]
    AlphaOutOfRange { device: usize, magnitude: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("buffer too short: need {needed} samples, got {actual}")]
    ShortBuffer { needed: usize, actual: usize },
    #[error("degenerate impedance pair: load equals antenna impedance")]
    DegenerateImpedance,
    #[error("quadrature did not converge: estimated error {achieved:e} > target {target:e}")]
    QuadratureNonConvergence { achieved: f64, target: f64 },
    #[error("at least {needed} pilot symbols are required, got {actual}")]
    InsufficientPilots { needed: usize, actual: usize },
    #[error("rate formula for {expected} applied to a {actual} allocation")]
    SchemeMismatch { expected: String, actual: String },
    #[error("sweep has {cells} cells which exceeds the budget of {budget}")]
    CellBudgetExceeded { cells: usize, budget: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
