use alloc::string::String;

/// Errors raised by the core toolkit.
///
/// The variants are grouped by the kind of failure so front ends can map
/// them onto distinct exit statuses.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input violates a documented domain restriction.
    #[error("domain error: {parameter}: {reason}")]
    Domain { parameter: &'static str, reason: String },

    /// A formula evaluated at (or numerically too close to) a pole.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A 2×2 (or larger) linear system became singular.
    #[error("degenerate system: {0}")]
    Degenerate(String),

    /// A truncated operator or series did not settle to the requested tolerance.
    #[error("convergence failure: {what} (defect {defect:e} > tolerance {tolerance:e})")]
    Convergence { what: &'static str, defect: f64, tolerance: f64 },

    /// The dense eigensolver did not converge or failed its residual check.
    #[error("eigensolver failure after {iterations} iterations: {reason}")]
    Eigensolver { iterations: usize, reason: String },

    /// A labelled state needed for parameter extraction was not found.
    #[error("missing spectral label ({0}, {1})")]
    MissingLabel(usize, usize),

    /// Bracketed root finding could not bracket a sign change.
    #[error("inversion failed: no root of {what} in [{lo:e}, {hi:e}]")]
    Inversion { what: &'static str, lo: f64, hi: f64 },

    /// Configuration values that are inconsistent with each other.
    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough samples survived selection to form an estimate.
    #[error("statistics error: {0}")]
    Statistics(String),

    /// A fit or calibration could not be formed.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// Optimizer start point has zero reward.
    #[error("optimizer initialization error: {0}")]
    Initialization(String),
}

impl Error {
    pub(crate) fn domain(parameter: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { parameter, reason: reason.into() }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
