//! Time-domain ensemble simulation: a phase-accumulation fast path and full
//! Bloch-vector evolution with finite pulses and systematic control errors.

mod bloch;
mod ensemble;
mod evolve;
mod robustness;

pub use bloch::QubitState;
pub use ensemble::{
    accumulate_phase, ensemble_coherence, ensemble_coherence_many, pairwise_sum, realize_phases, summarize_phases,
    EnsembleConfig, EnsembleEstimate, MIN_SAMPLES_PER_WINDOW,
};
pub use evolve::{evolve_sequence, ControlErrorModel, Evolution, FinalTailMode, DEFAULT_INTERPULSE_DETUNING};
pub use robustness::{robustness_scan, ErrorAxis, RobustnessMap, RobustnessMetadata, ScanNoise};
