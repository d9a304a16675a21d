//! Error type shared by every module.

use thiserror::Error;

/// Everything that can go wrong, from config validation to numerical failure.
///
/// The CLI maps these onto exit codes: validation and parse problems exit 2,
/// numerical and I/O failures exit 3.
#[derive(Debug, Error)]
pub enum SimError {
    // --- validation -------------------------------------------------------
    #[error("mass must be > 0")]
    NonPositiveMass,
    #[error("hbar must be > 0")]
    NonPositiveHbar,
    #[error("tau must be > 0 when measurement is on")]
    NonPositiveTau,
    #[error("initial width a0 must be > 0")]
    NonPositiveInitialWidth,
    #[error("parameter `{field}` is not finite")]
    NonFiniteParameter { field: &'static str },
    #[error("config error: {0}")]
    ValidationError(String),

    // --- config parsing ---------------------------------------------------
    #[error("parse error at line {line}, column {col}: {msg}")]
    ParseError {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("missing required key `{key}`")]
    MissingKey { key: &'static str },

    // --- numerics ---------------------------------------------------------
    #[error("packet width collapsed below {delta_min:e} at t = {t} (delta = {delta:e})")]
    WidthUnderflow { t: f64, delta: f64, delta_min: f64 },
    #[error("adaptive step size fell below {h_min:e} at t = {t}")]
    StepSizeUnderflow { t: f64, h_min: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("t = {t} outside the solution range [{t_min}, {t_max}]")]
    OutOfRange { t: f64, t_min: f64, t_max: f64 },
    #[error("grid unfit for finite differencing: {0}")]
    GridTooCoarse(String),
    #[error("spectrum tail at Nyquist is {tail_ratio:e} of peak (> {limit:e}): aliasing risk")]
    AliasingRisk { tail_ratio: f64, limit: f64 },
    #[error("e^(t/2tau) overflows double range at t = {t} (t/2tau = {exponent})")]
    Overflow { t: f64, exponent: f64 },
    #[error(
        "operation requires free-particle parameters (measurement off, omega = 0, lambda = 0)"
    )]
    NotFreeParticle,
    #[error("field magnitude {value:e} at the grid edge exceeds {limit:e}")]
    EdgeNotNegligible { value: f64, limit: f64 },

    // --- environment ------------------------------------------------------
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// CLI exit code for this error: 2 = rejected config, 3 = failed run.
    pub fn exit_code(&self) -> i32 {
        use SimError::*;
        match self {
            NonPositiveMass
            | NonPositiveHbar
            | NonPositiveTau
            | NonPositiveInitialWidth
            | NonFiniteParameter { .. }
            | ValidationError(_)
            | ParseError { .. }
            | UnknownKey { .. }
            | MissingKey { .. } => 2,
            _ => 3,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
