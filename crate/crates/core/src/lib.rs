//! Dynamical-decoupling simulation toolkit.
//!
//! Builds CPMG/UDD pulse layouts, evaluates their filter functions, synthesizes
//! classical dephasing noise with a prescribed spectrum, and estimates qubit
//! coherence both from the filter-function integral and by Monte Carlo.

pub mod analysis;
pub mod coherence;
pub mod error;
pub mod filter;
pub mod montecarlo;
pub mod noise;
pub mod quadrature;
pub mod sequences;

pub use analysis::{ComparisonReport, FitOptions, FitResult, ScalingStudy};
pub use coherence::{ChiEstimate, CoherenceCurve, CoherencePoint};
pub use error::{Error, LayoutViolation, Result};
pub use filter::{FilterSample, ToggleFunction};
pub use montecarlo::{ControlErrorModel, EnsembleConfig, EnsembleEstimate, QubitState, RobustnessMap};
pub use noise::{Band, NoiseTrace, SpectrumModel, SpectrumShape, Spur, TraceSynthesizer};
pub use sequences::{PulseAxis, SequenceFamily, SequenceKind, SequenceLayout, Tails};
pub use quadrature::QuadratureConfig;
