//! Noise-scale fitting, amplitude scaling studies and sequence comparisons.

mod compare;
mod fit;
mod scaling;

pub use compare::{coherence_time, compare_sequences, crossings, tau_at_chi, ComparisonReport, ComparisonRow, Crossover};
pub use fit::{fit_alpha, FitOptions, FitResult, LinearExponentFit};
pub use scaling::{regression_slope, scaling_study, ScalingConfig, ScalingPath, ScalingPoint, ScalingStudy, TauGrid};
