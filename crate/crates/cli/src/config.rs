//! Fully resolved run configurations. Each mirrors the flags of one
//! subcommand; a `--config` file supplies the same fields as JSON.

use std::f64::consts::TAU;
use std::path::PathBuf;

use ddsim::analysis::{FitOptions, ScalingPath};
use ddsim::sequences::{DEFAULT_FINAL_TAIL, DEFAULT_PRIMARY_TAIL};
use ddsim::{ControlErrorModel, PulseAxis, QuadratureConfig, SequenceFamily, SequenceKind, SpectrumModel, Tails};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn default_model() -> SpectrumModel {
    SpectrumModel::ohmic(1.0, TAU * 500.0)
}

/// Sequence family fields shared by most commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySpec {
    pub kind: SequenceKind,
    pub n: usize,
    pub tau_pi: f64,
    pub axis: PulseAxis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_quantum: Option<f64>,
    pub primary_tail: f64,
    pub final_tail: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            kind: SequenceKind::Cpmg,
            n: 1,
            tau_pi: 0.0,
            axis: PulseAxis::X,
            fractions: None,
            grid_quantum: None,
            primary_tail: DEFAULT_PRIMARY_TAIL,
            final_tail: DEFAULT_FINAL_TAIL,
        }
    }
}

impl FamilySpec {
    pub fn family(&self) -> CliResult<SequenceFamily> {
        let base = match (self.kind, &self.fractions) {
            (SequenceKind::Custom, Some(f)) => SequenceFamily::custom(f.clone(), self.tau_pi),
            (SequenceKind::Custom, None) => return Err(CliError::Config("custom sequences need `fractions`".into())),
            (kind, _) => SequenceFamily::new(kind, self.n, self.tau_pi),
        };
        Ok(base
            .with_axis(self.axis)
            .with_grid(self.grid_quantum)
            .with_tails(Tails { primary: self.primary_tail, final_: self.final_tail }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceConfig {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub tau: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig { family: FamilySpec::default(), tau: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub tau: f64,
    pub omega_tau_min: f64,
    pub omega_tau_max: f64,
    pub points: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { family: FamilySpec::default(), tau: 1e-3, omega_tau_min: 1e-3, omega_tau_max: 1e3, points: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub model: SpectrumModel,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    /// Number of independent streams, `0..traces`.
    pub traces: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { model: default_model(), duration: 10e-3, dt: 1e-6, seed: 0, traces: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsdConfig {
    pub model: SpectrumModel,
    /// Defaults to the model's support.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    pub points: usize,
}

impl Default for PsdConfig {
    fn default() -> Self {
        PsdConfig { model: default_model(), omega_min: None, omega_max: None, points: 500 }
    }
}

/// Periodogram of trace files, or of freshly synthesized traces when no
/// inputs are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodogramConfig {
    pub inputs: Vec<PathBuf>,
    #[serde(flatten)]
    pub synth: SynthConfig,
}

impl Default for PeriodogramConfig {
    fn default() -> Self {
        PeriodogramConfig { inputs: Vec::new(), synth: SynthConfig { traces: 100, ..SynthConfig::default() } }
    }
}

fn default_taus() -> Vec<f64> {
    crate::parse::log_space(1e-4, 1e-1, 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoherenceConfig {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub model: SpectrumModel,
    pub taus: Vec<f64>,
    pub quadrature: QuadratureConfig,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig { family: FamilySpec::default(), model: default_model(), taus: default_taus(), quadrature: QuadratureConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleRunConfig {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub model: SpectrumModel,
    pub taus: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    /// Defaults to the shortest free window over 16.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub batches: usize,
    pub quadrature: QuadratureConfig,
}

impl Default for EnsembleRunConfig {
    fn default() -> Self {
        EnsembleRunConfig {
            family: FamilySpec::default(),
            model: default_model(),
            taus: crate::parse::log_space(1e-3, 1e-2, 8),
            realizations: 1000,
            seed: 0,
            dt: None,
            duration: None,
            batches: 20,
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    PulseLength,
    Detuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub tau: f64,
    pub error_kind: ErrorKind,
    /// Fractional deviations or detunings in rad/s.
    pub errors: Vec<f64>,
    pub theta0: Vec<f64>,
    pub base: ControlErrorModel,
    /// Average over noise from this model when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<SpectrumModel>,
    pub realizations: usize,
    pub seed: u64,
    pub dt: f64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            family: FamilySpec { n: 6, tau_pi: 185e-6, ..FamilySpec::default() },
            tau: 9.11e-3,
            error_kind: ErrorKind::PulseLength,
            errors: (0..=20).map(|k| -0.5 + 0.05 * k as f64).collect(),
            theta0: (0..16).map(|k| k as f64 * TAU / 16.0).collect(),
            base: ControlErrorModel::default(),
            model: None,
            realizations: 200,
            seed: 0,
            dt: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Curve CSV with `tau_s` and `W` or `error_prob` columns.
    pub measured: PathBuf,
    #[serde(flatten)]
    pub family: FamilySpec,
    pub model: SpectrumModel,
    pub options: FitOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { measured: PathBuf::new(), family: FamilySpec::default(), model: default_model(), options: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingRunConfig {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub model: SpectrumModel,
    pub amplitudes: Vec<f64>,
    /// Coherence values the per-amplitude `τ` grid aims at.
    pub targets: Vec<f64>,
    pub tau_bracket: (f64, f64),
    pub path: ScalingPath,
    pub realizations: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub batches: usize,
    pub options: FitOptions,
}

impl Default for ScalingRunConfig {
    fn default() -> Self {
        ScalingRunConfig {
            family: FamilySpec { kind: SequenceKind::Udd, n: 4, tau_pi: 20e-6, ..FamilySpec::default() },
            model: SpectrumModel::ohmic(100.0, TAU * 500.0),
            amplitudes: vec![0.1, 0.2, 0.5, 1.0, 2.0],
            targets: vec![0.9, 0.75, 0.6, 0.45, 0.3, 0.2],
            tau_bracket: (5e-4, 1.0),
            path: ScalingPath::MonteCarlo,
            realizations: 1000,
            seed: 0,
            dt: None,
            batches: 20,
            options: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub kinds: Vec<SequenceKind>,
    pub ns: Vec<usize>,
    pub tau_pi: f64,
    pub model: SpectrumModel,
    pub taus: Vec<f64>,
    pub quadrature: QuadratureConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            kinds: vec![SequenceKind::Cpmg, SequenceKind::Udd],
            ns: (2..=10).collect(),
            tau_pi: 0.0,
            model: SpectrumModel::ohmic(1e4, TAU * 500.0),
            taus: crate::parse::log_space(1e-4, 1e-2, 41),
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// A resolved command with its configuration; what a manifest replays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum RunConfig {
    Sequence(SequenceConfig),
    Filter(FilterConfig),
    NoiseSynth(SynthConfig),
    NoisePsd(PsdConfig),
    NoisePeriodogram(PeriodogramConfig),
    Coherence(CoherenceConfig),
    Ensemble(EnsembleRunConfig),
    Robustness(RobustnessConfig),
    Fit(FitConfig),
    Scaling(ScalingRunConfig),
    Compare(CompareConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Sequence(_) => "sequence",
            RunConfig::Filter(_) => "filter",
            RunConfig::NoiseSynth(_) => "noise_synth",
            RunConfig::NoisePsd(_) => "noise_psd",
            RunConfig::NoisePeriodogram(_) => "noise_periodogram",
            RunConfig::Coherence(_) => "coherence",
            RunConfig::Ensemble(_) => "ensemble",
            RunConfig::Robustness(_) => "robustness",
            RunConfig::Fit(_) => "fit",
            RunConfig::Scaling(_) => "scaling",
            RunConfig::Compare(_) => "compare",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::NoiseSynth(c) => Some(c.seed),
            RunConfig::NoisePeriodogram(c) if c.inputs.is_empty() => Some(c.synth.seed),
            RunConfig::Ensemble(c) => Some(c.seed),
            RunConfig::Robustness(c) if c.model.is_some() => Some(c.seed),
            RunConfig::Scaling(c) if c.path == ScalingPath::MonteCarlo => Some(c.seed),
            _ => None,
        }
    }

    /// Files the run reads.
    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            RunConfig::NoisePeriodogram(c) => c.inputs.clone(),
            RunConfig::Fit(c) => vec![c.measured.clone()],
            _ => Vec::new(),
        }
    }
}
