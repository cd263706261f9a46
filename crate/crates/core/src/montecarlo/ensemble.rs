use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{toggle_function, ToggleFunction};
use crate::noise::{NoiseTrace, SpectrumModel, TraceSynthesizer};
use crate::sequences::SequenceLayout;

/// Finest free window must span at least this many samples.
pub const MIN_SAMPLES_PER_WINDOW: f64 = 16.0;

/// `φ = ∫ s(t) β(t) dt` over the sequence, with `β` linearly interpolated
/// between samples.
pub fn accumulate_phase(toggle: &ToggleFunction, trace: &NoiseTrace) -> Result<f64> {
    check_coverage(toggle, trace)?;
    Ok(phase_unchecked(toggle, trace))
}

fn phase_unchecked(toggle: &ToggleFunction, trace: &NoiseTrace) -> f64 {
    toggle.free_windows().map(|s| s.value as f64 * trace.integrate(s.start, s.end)).sum()
}

pub(crate) fn check_coverage(toggle: &ToggleFunction, trace: &NoiseTrace) -> Result<()> {
    if trace.duration() < toggle.tau * (1.0 - 1e-12) {
        return Err(Error::TraceMismatch(format!(
            "trace lasts {} s but the sequence needs {} s",
            trace.duration(),
            toggle.tau
        )));
    }
    let shortest = toggle.free_windows().map(|s| s.len()).fold(f64::INFINITY, f64::min);
    if shortest.is_finite() && trace.dt * MIN_SAMPLES_PER_WINDOW > shortest * (1.0 + 1e-9) {
        return Err(Error::TraceMismatch(format!(
            "dt = {} s is too coarse for a {} s free window (need dt <= window/{MIN_SAMPLES_PER_WINDOW})",
            trace.dt, shortest
        )));
    }
    Ok(())
}

/// Sampling and bookkeeping for a Monte Carlo ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub realizations: usize,
    pub seed: u64,
    /// Trace sample spacing in seconds.
    pub dt: f64,
    /// Trace length in seconds. Defaults to `duration_factor` times the
    /// longest sequence, so the frequency grid resolves the filter function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default = "default_duration_factor")]
    pub duration_factor: f64,
    /// Number of contiguous batches for the batch-means standard error.
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_duration_factor() -> f64 {
    32.0
}

fn default_batches() -> usize {
    20
}

impl EnsembleConfig {
    pub fn new(realizations: usize, seed: u64, dt: f64) -> Self {
        EnsembleConfig {
            realizations,
            seed,
            dt,
            duration: None,
            duration_factor: default_duration_factor(),
            batches: default_batches(),
        }
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = Some(duration);
        self
    }

    fn trace_duration(&self, longest: f64) -> f64 {
        self.duration.unwrap_or(self.duration_factor * longest).max(longest)
    }
}

/// Monte Carlo coherence at one `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub tau: f64,
    /// `|mean e^{iφ}|`.
    #[serde(rename = "W")]
    pub w: f64,
    pub stderr: f64,
    /// `mean(φ²) / 2`, which equals `χ` for Gaussian noise.
    pub half_mean_square: f64,
    pub half_mean_square_stderr: f64,
    pub realizations: usize,
}

/// Sum in a fixed pairwise order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

fn batch_stderr(values: &[f64], batches: usize) -> f64 {
    let batches = batches.clamp(2, values.len());
    let size = values.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| pairwise_sum(&values[b * size..(b + 1) * size]) / size as f64).collect();
    let grand = pairwise_sum(&means) / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Phases `φ` of every realization (rows) for every layout (columns).
///
/// Realization `k` uses noise stream `k` of `config.seed`, so the matrix does
/// not depend on how the work is scheduled.
pub fn realize_phases(layouts: &[SequenceLayout], model: &SpectrumModel, config: &EnsembleConfig) -> Result<Vec<Vec<f64>>> {
    if config.realizations < 2 {
        return Err(Error::invalid("realizations", "need at least two"));
    }
    if layouts.is_empty() {
        return Ok(vec![Vec::new(); config.realizations]);
    }
    let longest = layouts.iter().map(|l| l.tau).fold(0.0, f64::max);
    let synth = TraceSynthesizer::new(model, config.trace_duration(longest), config.dt)?;
    let toggles: Vec<ToggleFunction> = layouts.iter().map(toggle_function).collect();
    let probe = synth.trace(config.seed, 0);
    for (toggle, layout) in toggles.iter().zip(layouts) {
        check_coverage(toggle, &probe).map_err(|e| e.at_tau(layout.tau))?;
    }
    Ok((0..config.realizations as u64)
        .into_par_iter()
        .map(|k| {
            let trace = synth.trace(config.seed, k);
            toggles.iter().map(|t| phase_unchecked(t, &trace)).collect()
        })
        .collect())
}

/// Reduces a phase matrix column to a coherence estimate.
pub fn summarize_phases(tau: f64, phases: &[f64], batches: usize) -> EnsembleEstimate {
    let n = phases.len() as f64;
    let cos: Vec<f64> = phases.iter().map(|p| p.cos()).collect();
    let sin: Vec<f64> = phases.iter().map(|p| p.sin()).collect();
    let (mc, ms) = (pairwise_sum(&cos) / n, pairwise_sum(&sin) / n);
    let w = mc.hypot(ms);
    // Standard error of the projection onto the mean direction.
    let (ux, uy) = if w > 0.0 { (mc / w, ms / w) } else { (1.0, 0.0) };
    let projected: Vec<f64> = cos.iter().zip(&sin).map(|(c, s)| c * ux + s * uy).collect();
    let half_sq: Vec<f64> = phases.iter().map(|p| 0.5 * p * p).collect();
    EnsembleEstimate {
        tau,
        w,
        stderr: batch_stderr(&projected, batches),
        half_mean_square: pairwise_sum(&half_sq) / n,
        half_mean_square_stderr: batch_stderr(&half_sq, batches),
        realizations: phases.len(),
    }
}

/// Monte Carlo coherence for many layouts sharing one set of noise traces.
pub fn ensemble_coherence_many(
    layouts: &[SequenceLayout],
    model: &SpectrumModel,
    config: &EnsembleConfig,
) -> Result<Vec<EnsembleEstimate>> {
    let matrix = realize_phases(layouts, model, config)?;
    Ok(layouts
        .iter()
        .enumerate()
        .map(|(j, layout)| {
            let column: Vec<f64> = matrix.iter().map(|row| row[j]).collect();
            summarize_phases(layout.tau, &column, config.batches)
        })
        .collect())
}

/// Monte Carlo coherence of one layout.
pub fn ensemble_coherence(layout: &SequenceLayout, model: &SpectrumModel, config: &EnsembleConfig) -> Result<EnsembleEstimate> {
    Ok(ensemble_coherence_many(std::slice::from_ref(layout), model, config)?.remove(0))
}
