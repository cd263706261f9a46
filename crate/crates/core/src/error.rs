use thiserror::Error;

/// Errors produced anywhere in the simulation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid layout: {0}")]
    Layout(#[from] LayoutViolation),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("frequency {omega} rad/s is outside the domain of the spectrum (must be > 0)")]
    FrequencyDomain { omega: f64 },

    #[error("spectrum band [{band_lo}, {band_hi}] rad/s lies entirely above the Nyquist frequency {nyquist} rad/s; reduce dt")]
    AboveNyquist { band_lo: f64, band_hi: f64, nyquist: f64 },

    #[error("trace does not cover the sequence: {0}")]
    TraceMismatch(String),

    #[error("quadrature did not converge after {subdivisions} subdivisions (last estimates {previous} and {last})")]
    NotConverged { subdivisions: usize, previous: f64, last: f64 },

    #[error("dephasing integral diverges at low frequency (integrand ~ omega^{exponent:.2})")]
    Divergent { exponent: f64 },

    #[error("negative dephasing exponent {0} from quadrature")]
    NegativeChi(f64),

    #[error("at tau = {tau} s: {source}")]
    AtTau { tau: f64, source: Box<Error> },

    #[error("parameter not identifiable: {0}")]
    Unidentifiable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// The specific layout invariant that failed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutViolation {
    #[error("pulse count {n} does not match {fractions} fractions")]
    CountMismatch { n: usize, fractions: usize },

    #[error("fraction {index} = {value} is not inside (0, 1)")]
    FractionOutOfRange { index: usize, value: f64 },

    #[error("fractions are not strictly increasing at index {index}")]
    NotIncreasing { index: usize },

    #[error("pulses {index} and {next} overlap: gap {gap} s < pulse duration {tau_pi} s")]
    Overlap { index: usize, next: usize, gap: f64, tau_pi: f64 },

    #[error("first pulse starts before t = 0 (center {center} s, half width {half_width} s)")]
    LeadingEdge { center: f64, half_width: f64 },

    #[error("last pulse ends after t = tau (center {center} s, half width {half_width} s, tau {tau} s)")]
    TrailingEdge { center: f64, half_width: f64, tau: f64 },

    #[error("total pulse time {pulse_time} s exceeds duration {tau} s")]
    TooShort { pulse_time: f64, tau: f64 },

    #[error("duration must be positive and finite, got {0}")]
    Duration(f64),

    #[error("pulse duration must be >= 0 and finite, got {0}")]
    PulseDuration(f64),

    #[error("axis plan has {plan} entries for {n} pulses")]
    AxisPlan { plan: usize, n: usize },

    #[error("interval {index} = {interval} s is not a multiple of the grid quantum {quantum} s")]
    OffGrid { index: usize, interval: f64, quantum: f64 },

    #[error("grid rounding collapses interval {index} ({interval} s) with quantum {quantum} s")]
    Collapsed { index: usize, interval: f64, quantum: f64 },

    #[error("tail delays must be >= 0 and finite")]
    Tail,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }

    pub(crate) fn at_tau(self, tau: f64) -> Self {
        Error::AtTau { tau, source: Box::new(self) }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
