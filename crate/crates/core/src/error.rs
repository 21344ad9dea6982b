use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("loop closure did not converge after {iterations} iterations (residual {residual:e} rad)")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("theta2 = {theta2}° is outside the branch domain [{lo}°, {hi}°]")]
    OutOfRange { theta2: f64, lo: f64, hi: f64 },

    #[error("infeasible calibration anchors: {0}")]
    InfeasibleAnchors(String),

    #[error("no trigger contact at theta2 = {theta2}° (theta2_max = {theta2_max}°)")]
    NoContact { theta2: f64, theta2_max: f64 },

    #[error("arcsin argument {value} is outside [-1, 1]; trigger geometry is not solvable")]
    ArgOutOfRange { value: f64 },

    #[error("displacement {x} mm exceeds the stroke {stroke} mm that reaches the flip point")]
    BeyondFlip { x: f64, stroke: f64 },

    #[error("finite-difference derivative unstable at {at}: {coarse:e} vs {fine:e} under step halving")]
    DerivativeUnstable { at: f64, coarse: f64, fine: f64 },

    #[error("yaw {psi}° lies in the double-contact band [-45°, -40°]")]
    DoubleContact { psi: f64 },

    #[error("sample rate {rate} Hz must exceed twice the cutoff {cutoff} Hz")]
    RateTooLow { rate: f64, cutoff: f64 },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("integration range [{lo}, {hi}] mm is outside the trace range [{min}, {max}] mm")]
    RangeOutsideTrace { lo: f64, hi: f64, min: f64, max: f64 },

    #[error("no feasible design point: {0}")]
    Infeasible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake_case identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NoConvergence { .. } => "no_convergence",
            Error::OutOfRange { .. } => "out_of_range",
            Error::InfeasibleAnchors(_) => "infeasible_anchors",
            Error::NoContact { .. } => "no_contact",
            Error::ArgOutOfRange { .. } => "arg_out_of_range",
            Error::BeyondFlip { .. } => "beyond_flip",
            Error::DerivativeUnstable { .. } => "derivative_unstable",
            Error::DoubleContact { .. } => "double_contact",
            Error::RateTooLow { .. } => "rate_too_low",
            Error::EmptyTrace => "empty_trace",
            Error::RangeOutsideTrace { .. } => "range_outside_trace",
            Error::Infeasible(_) => "infeasible",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
