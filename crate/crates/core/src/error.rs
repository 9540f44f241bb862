use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The time grid or quadrature is too coarse for the requested accuracy.
    #[error("numerical resolution error: {message} (required steps: {required_steps})")]
    Resolution {
        message: String,
        required_steps: usize,
    },

    /// No sign change of the phase residual was found on the scan bracket.
    #[error(
        "calibration failed: no sign change of the phase residual on [{lower}, {upper}] \
         (residuals {residual_lower:.6e}, {residual_upper:.6e})"
    )]
    Calibration {
        lower: f64,
        upper: f64,
        residual_lower: f64,
        residual_upper: f64,
    },

    /// A caller broke a documented precondition, e.g. a trajectory started from
    /// the wrong state.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix size error: {0}")]
    Size(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
