//! Command-line surface. Every flag is optional; set flags override the
//! `--config` file, which overrides the defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ddsim::{PulseAxis, SequenceKind, SpectrumModel};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::parse;

// Aliases keep clap from treating these as repeated flags; each is one
// comma or range argument.
type FloatList = Vec<f64>;
type KindList = Vec<SequenceKind>;
type CountList = Vec<usize>;

#[derive(Debug, Parser)]
#[command(name = "ddsim", version, about = "Dynamical-decoupling noise and coherence simulator")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Re-run a recorded manifest and check its output digests.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// JSON file with the subcommand's configuration fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit a pulse layout.
    Sequence(SequenceArgs),
    /// Emit a filter-function curve.
    Filter(FilterArgs),
    /// Noise synthesis and spectra.
    #[command(subcommand)]
    Noise(NoiseCommand),
    /// Predicted coherence from the filter-function integral.
    Coherence(CoherenceArgs),
    /// Monte Carlo coherence next to the prediction.
    Ensemble(EnsembleArgs),
    /// Bright population over initial phase and control error.
    Robustness(RobustnessArgs),
    /// Fit the noise scale to a measured curve.
    Fit(FitArgs),
    /// Fitted noise scale versus noise amplitude.
    Scaling(ScalingArgs),
    /// Error probabilities and crossovers of several sequences.
    Compare(CompareArgs),
}

#[derive(Debug, Subcommand)]
pub enum NoiseCommand {
    /// Synthesize noise traces.
    Synth(SynthArgs),
    /// Tabulate a spectrum.
    Psd(PsdArgs),
    /// Mean periodogram of traces.
    Periodogram(PeriodogramArgs),
}

fn strip_nulls(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => Map::new(),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FamilyArgs {
    /// cpmg, udd or custom.
    #[arg(long, value_parser = parse::kind)]
    pub kind: Option<SequenceKind>,
    /// Number of π pulses.
    #[arg(long)]
    pub n: Option<usize>,
    /// π-pulse duration in seconds.
    #[arg(long)]
    pub tau_pi: Option<f64>,
    /// x or y (effective π_Y).
    #[arg(long, value_parser = parse::axis)]
    pub axis: Option<PulseAxis>,
    /// Center fractions for custom sequences, comma separated.
    #[arg(long, value_parser = parse::grid, allow_hyphen_values = true)]
    pub fractions: Option<FloatList>,
    /// Round free intervals to multiples of this many seconds.
    #[arg(long)]
    pub grid_quantum: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SequenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub omega_tau_min: Option<f64>,
    #[arg(long)]
    pub omega_tau_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

const MODEL_HELP: &str = "ohmic:A,cutoff_hz | ambient:alpha,ref_hz[,spur_hz,weight] | white:S,lo_hz,hi_hz | power:p,A,ref_hz | table:file | JSON";

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_parser = parse::model, help = MODEL_HELP)]
    pub model: Option<SpectrumModel>,
    /// Noise amplitude V_N applied to the model.
    #[arg(long)]
    #[serde(skip)]
    pub vn: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub traces: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PsdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PeriodogramArgs {
    /// Trace CSV files (`t_s,beta_rad_s`). Without any, traces are synthesized.
    #[arg(long, num_args = 1..)]
    pub inputs: Option<Vec<PathBuf>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub synth: SynthArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoherenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// `a,b,c` or `lo:hi:count` (log spaced), seconds.
    #[arg(long, value_parser = parse::grid, allow_hyphen_values = true)]
    pub taus: Option<FloatList>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnsembleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse::grid, allow_hyphen_values = true)]
    pub taus: Option<FloatList>,
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RobustnessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum)]
    pub error_kind: Option<ErrorKindArg>,
    /// Error values, `a,b,c`.
    #[arg(long, value_parser = parse::grid, allow_hyphen_values = true)]
    pub errors: Option<FloatList>,
    /// Initial phases in rad, `a,b,c`.
    #[arg(long, value_parser = parse::grid, allow_hyphen_values = true)]
    pub theta0: Option<FloatList>,
    /// Average over noise from this model.
    #[arg(long, value_parser = parse::model, help = MODEL_HELP)]
    pub model: Option<SpectrumModel>,
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKindArg {
    PulseLength,
    Detuning,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Curve CSV with `tau_s` and `W` or `error_prob`.
    #[arg(long)]
    pub measured: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Also fit the spur weight.
    #[arg(long)]
    #[serde(skip)]
    pub fit_gamma: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScalingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse::grid, allow_hyphen_values = true)]
    pub amplitudes: Option<FloatList>,
    #[arg(long, value_parser = parse::grid, allow_hyphen_values = true)]
    pub targets: Option<FloatList>,
    /// Use χ linearity instead of Monte Carlo.
    #[arg(long)]
    #[serde(skip)]
    pub analytic: bool,
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// Comma separated, e.g. `cpmg,udd`.
    #[arg(long, value_parser = parse::kinds)]
    pub kinds: Option<KindList>,
    /// `2..10` or `2,4,6`.
    #[arg(long, value_parser = parse::counts)]
    pub ns: Option<CountList>,
    #[arg(long)]
    pub tau_pi: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse::grid, allow_hyphen_values = true)]
    pub taus: Option<FloatList>,
}

/// Reads a `--config` file: either bare fields or a manifest-style
/// `{"command": .., "config": {..}}` object.
pub fn read_config_file(path: &std::path::Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match value {
        Value::Object(mut map) => match map.remove("config") {
            Some(Value::Object(inner)) if map.contains_key("command") => Ok(inner),
            Some(other) => {
                map.insert("config".into(), other);
                Ok(map)
            }
            None => Ok(map),
        },
        _ => Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
    }
}

/// Defaults, then the config file, then flags. Defaults are laid down
/// explicitly because a flattened struct would otherwise fall back to its own
/// defaults rather than the command's.
fn merge<T: serde::de::DeserializeOwned + Serialize + Default>(file: Map<String, Value>, flags: Map<String, Value>) -> CliResult<T> {
    let mut base = match serde_json::to_value(T::default())? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    base.extend(file);
    base.extend(flags);
    Ok(serde_json::from_value(Value::Object(base))?)
}

fn overlay(args: &impl Serialize, seed: Option<u64>) -> CliResult<Map<String, Value>> {
    let mut map = strip_nulls(serde_json::to_value(args)?);
    if let Some(s) = seed {
        map.insert("seed".into(), s.into());
    }
    Ok(map)
}

fn apply_vn(model: &mut SpectrumModel, vn: Option<f64>) {
    if let Some(v) = vn {
        model.scale = v;
    }
}

/// Resolves a subcommand into a full configuration.
pub fn resolve(command: &Command, file: Map<String, Value>, seed: Option<u64>) -> CliResult<RunConfig> {
    Ok(match command {
        Command::Sequence(a) => RunConfig::Sequence(merge(file, overlay(a, None)?)?),
        Command::Filter(a) => RunConfig::Filter(merge(file, overlay(a, None)?)?),
        Command::Noise(NoiseCommand::Synth(a)) => {
            let mut c: crate::config::SynthConfig = merge(file, overlay(a, seed)?)?;
            apply_vn(&mut c.model, a.model.vn);
            RunConfig::NoiseSynth(c)
        }
        Command::Noise(NoiseCommand::Psd(a)) => {
            let mut c: crate::config::PsdConfig = merge(file, overlay(a, None)?)?;
            apply_vn(&mut c.model, a.model.vn);
            RunConfig::NoisePsd(c)
        }
        Command::Noise(NoiseCommand::Periodogram(a)) => {
            let mut c: crate::config::PeriodogramConfig = merge(file, overlay(a, seed)?)?;
            apply_vn(&mut c.synth.model, a.synth.model.vn);
            RunConfig::NoisePeriodogram(c)
        }
        Command::Coherence(a) => {
            let mut c: crate::config::CoherenceConfig = merge(file, overlay(a, None)?)?;
            apply_vn(&mut c.model, a.model.vn);
            RunConfig::Coherence(c)
        }
        Command::Ensemble(a) => {
            let mut c: crate::config::EnsembleRunConfig = merge(file, overlay(a, seed)?)?;
            apply_vn(&mut c.model, a.model.vn);
            RunConfig::Ensemble(c)
        }
        Command::Robustness(a) => RunConfig::Robustness(merge(file, overlay(a, seed)?)?),
        Command::Fit(a) => {
            let mut c: crate::config::FitConfig = merge(file, overlay(a, None)?)?;
            apply_vn(&mut c.model, a.model.vn);
            if a.fit_gamma {
                c.options.fit_gamma = true;
            }
            RunConfig::Fit(c)
        }
        Command::Scaling(a) => {
            let mut c: crate::config::ScalingRunConfig = merge(file, overlay(a, seed)?)?;
            apply_vn(&mut c.model, a.model.vn);
            if a.analytic {
                c.path = ddsim::analysis::ScalingPath::Analytic;
            }
            RunConfig::Scaling(c)
        }
        Command::Compare(a) => {
            let mut c: crate::config::CompareConfig = merge(file, overlay(a, None)?)?;
            apply_vn(&mut c.model, a.model.vn);
            RunConfig::Compare(c)
        }
    })
}
