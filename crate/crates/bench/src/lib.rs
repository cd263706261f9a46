//! Shared fixtures for the kernel benchmarks.

use std::f64::consts::TAU;

use ddsim::{EnsembleConfig, SequenceFamily, SequenceLayout, SpectrumModel, Spur};

pub fn udd_layout(n: usize, tau: f64) -> SequenceLayout {
    SequenceFamily::udd(n, 20e-6).layout(tau).expect("fixture layout is valid")
}

pub fn ohmic() -> SpectrumModel {
    SpectrumModel::ohmic(1.0, TAU * 500.0)
}

pub fn ambient() -> SpectrumModel {
    SpectrumModel::ambient(1.0, TAU, vec![Spur::at_hz(153.0, 0.15)])
}

pub fn ensemble(realizations: usize) -> EnsembleConfig {
    EnsembleConfig::new(realizations, 1, 5e-6)
}
