use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure classes shared by every pipeline stage.
///
/// The CLI maps these onto its exit-code contract, so new variants must be
/// assigned to one of [`ErrorClass`]'s buckets.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {field} {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("gate `{gate}` failed: sup residual {value:.3e} exceeds {limit:.3e}")]
    Gate {
        gate: String,
        value: f64,
        limit: f64,
    },

    #[error("Higgs field not nilpotent; kernel line undefined (sup |det| = {det_sup:.3e}, gate {gate:.3e})")]
    NotNilpotent { det_sup: f64, gate: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("solver diverged: {reason} after {} iterations", history.len())]
    Divergence { reason: String, history: Vec<f64> },

    #[error("slice synthesis did not converge: {reason}")]
    Synthesis { reason: String, history: Vec<f64> },

    #[error("gauge transform moves a nonzero entry to power {power}, outside [{min}, {max}]")]
    PowerOverflow { power: i32, min: i32, max: i32 },

    #[error("loop error: {0}")]
    Loop(String),

    #[error("loop leaves the domain at t = {t}")]
    LoopExitsDomain { t: f64 },

    #[error("not a WKB curve: {0}")]
    NotWkb(String),

    #[error("no WKB loop found; best margin {best_margin:.3e} below required {required:.3e}")]
    LoopNotFound { best_margin: f64, required: f64 },

    #[error("malformed table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse grouping used for exit codes and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Gate,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain { .. }
            | Error::DomainMismatch
            | Error::Validation(_)
            | Error::Loop(_)
            | Error::LoopExitsDomain { .. }
            | Error::Table(_) => ErrorClass::Input,
            Error::Gate { .. }
            | Error::NotNilpotent { .. }
            | Error::Degenerate(_)
            | Error::NotWkb(_)
            | Error::LoopNotFound { .. }
            | Error::PowerOverflow { .. } => ErrorClass::Gate,
            Error::Divergence { .. } | Error::Synthesis { .. } => ErrorClass::Numerical,
            Error::Io(_) | Error::Csv(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn gate(gate: impl Into<String>, value: f64, limit: f64) -> Self {
        Error::Gate {
            gate: gate.into(),
            value,
            limit,
        }
    }
}
