//! Classical dephasing noise: spectral models and time-domain realizations.
//!
//! # Normalization
//!
//! Frequencies are angular (rad/s). `S(ω)` is one-sided and normalized so
//! that
//!
//! ```text
//! Var[β] = (4/π) ∫₀^∞ S(ω) dω
//! ```
//!
//! which is the scaling under which the coherence integral
//! `χ = (2/π) ∫ S(ω) F(ωτ) / ω² dω` equals half the mean squared phase
//! `∫ s(t) β(t) dt` of a Gaussian process. Synthesis, the periodogram and
//! the coherence integral all go through [`POWER_TO_VARIANCE`]; nothing else
//! hard-codes the factor.

mod periodogram;
mod spectrum;
mod trace;

pub use periodogram::{mean_periodogram, periodogram, periodogram_bins};
pub use spectrum::{
    psd, read_tabulated_csv, write_tabulated_csv, Band, SpectrumModel, SpectrumShape, Spur, DEFAULT_BAND,
    TABULATED_CONVENTION,
};
pub use trace::{synthesize_trace, write_trace_csv, NoiseTrace, TraceSynthesizer};

/// `Var[β] = POWER_TO_VARIANCE · ∫₀^∞ S(ω) dω`.
pub const POWER_TO_VARIANCE: f64 = 4.0 / std::f64::consts::PI;
