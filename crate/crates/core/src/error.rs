use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cavity amplitude is singular: zero damping at resonance")]
    Singular,

    #[error("knob {name} = {value:e} rad/s outside [{low:e}, {high:e}]")]
    KnobOutOfRange {
        name: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("steady state is ambiguous: two smallest singular values {smallest:e}, {second:e} (largest {largest:e})")]
    AmbiguousKernel {
        smallest: f64,
        second: f64,
        largest: f64,
    },

    #[error("Fock truncation n_max = {n_max} rejected: tail population {tail:e}")]
    Truncation { n_max: usize, tail: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("time step {dt:e} s exceeds stability limit {limit:e} s")]
    StepSize { dt: f64, limit: f64 },

    #[error("quadrature did not converge on [{from:e}, {to:e}] after {points} points: estimate {estimate:e}, error {error:e}")]
    Quadrature {
        from: f64,
        to: f64,
        points: usize,
        estimate: f64,
        error: f64,
    },

    #[error(
        "cycle is not closed: stroke 4 ends at ({0:e}, {1:e}), stroke 1 starts at ({2:e}, {3:e})"
    )]
    OpenLoop(f64, f64, f64, f64),

    #[error("no present value in surface `{0}`")]
    EmptySurface(String),
}

impl EngineError {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        EngineError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;
