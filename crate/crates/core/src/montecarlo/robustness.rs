use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{check_coverage, pairwise_sum, EnsembleConfig};
use super::evolve::{evolve_sequence, ControlErrorModel};
use crate::error::{Error, Result};
use crate::filter::toggle_function;
use crate::noise::{SpectrumModel, TraceSynthesizer};
use crate::sequences::{SequenceFamily, SequenceKind};

/// The systematic error swept along the second map axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum ErrorAxis {
    /// Fractional pulse-length deviations `ε`.
    PulseLength(Vec<f64>),
    /// Static detunings `Δ` in rad/s.
    Detuning(Vec<f64>),
}

impl ErrorAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            ErrorAxis::PulseLength(v) | ErrorAxis::Detuning(v) => v,
        }
    }

    fn apply(&self, base: &ControlErrorModel, value: f64) -> ControlErrorModel {
        match self {
            ErrorAxis::PulseLength(_) => base.with_pulse_length_scale(value),
            ErrorAxis::Detuning(_) => base.with_static_detuning(value),
        }
    }
}

/// Run description attached to a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessMetadata {
    pub kind: SequenceKind,
    pub n: usize,
    pub tau: f64,
    pub tau_pi: f64,
    pub base_errors: ControlErrorModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<SpectrumModel>,
    pub realizations: usize,
}

/// Final bright-state population over (initial phase, error) cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessMap {
    pub theta0: Vec<f64>,
    pub errors: ErrorAxis,
    /// `values[i][j]` belongs to `theta0[i]` and `errors.values()[j]`.
    pub values: Vec<Vec<f64>>,
    pub metadata: RobustnessMetadata,
}

impl RobustnessMap {
    pub fn value(&self, theta_index: usize, error_index: usize) -> f64 {
        self.values[theta_index][error_index]
    }

    /// Long-format `theta0_rad,error_param,bright_population`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["theta0_rad", "error_param", "bright_population"])?;
        for (theta, row) in self.theta0.iter().zip(&self.values) {
            for (param, value) in self.errors.values().iter().zip(row) {
                out.write_record([theta.to_string(), param.to_string(), value.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Noise source for an averaged scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanNoise<'a> {
    pub model: &'a SpectrumModel,
    pub ensemble: &'a EnsembleConfig,
}

/// Bright population after `family` at total time `tau` for every
/// `(θ₀, error)` cell. Deterministic single runs without noise; averaged
/// over the ensemble otherwise.
pub fn robustness_scan(
    family: &SequenceFamily,
    tau: f64,
    errors: &ErrorAxis,
    theta0: &[f64],
    base: &ControlErrorModel,
    noise: Option<ScanNoise<'_>>,
) -> Result<RobustnessMap> {
    if theta0.is_empty() || errors.values().is_empty() {
        return Err(Error::invalid("grid", "both map axes need at least one value"));
    }
    let layout = family.layout(tau)?;
    let cells: Vec<ControlErrorModel> = theta0
        .iter()
        .flat_map(|&th| errors.values().iter().map(move |&v| errors.apply(&base.with_initial_phase(th), v)))
        .collect();
    for c in &cells {
        c.validate()?;
    }
    let flat: Vec<f64> = match noise {
        None => cells
            .par_iter()
            .map(|c| evolve_sequence(&layout, None, c).map(|e| e.final_state.bright_population()))
            .collect::<Result<_>>()?,
        Some(ScanNoise { model, ensemble }) => {
            if ensemble.realizations < 1 {
                return Err(Error::invalid("realizations", "need at least one"));
            }
            let duration = ensemble.duration.unwrap_or(layout.tau).max(layout.tau);
            let synth = TraceSynthesizer::new(model, duration, ensemble.dt)?;
            check_coverage(&toggle_function(&layout), &synth.trace(ensemble.seed, 0))?;
            let rows: Vec<Vec<f64>> = (0..ensemble.realizations as u64)
                .into_par_iter()
                .map(|k| {
                    let trace = synth.trace(ensemble.seed, k);
                    cells
                        .iter()
                        .map(|c| {
                            evolve_sequence(&layout, Some(&trace), c)
                                .map(|e| e.final_state.bright_population())
                                .unwrap_or(f64::NAN)
                        })
                        .collect()
                })
                .collect();
            (0..cells.len())
                .map(|j| {
                    let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    pairwise_sum(&column) / column.len() as f64
                })
                .collect()
        }
    };
    let width = errors.values().len();
    Ok(RobustnessMap {
        theta0: theta0.to_vec(),
        errors: errors.clone(),
        values: flat.chunks(width).map(|c| c.to_vec()).collect(),
        metadata: RobustnessMetadata {
            kind: layout.kind,
            n: layout.n,
            tau,
            tau_pi: layout.tau_pi,
            base_errors: *base,
            noise: noise.map(|n| n.model.clone()),
            realizations: noise.map_or(1, |n| n.ensemble.realizations),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn error_free_column_is_dark() {
        let family = SequenceFamily::udd(6, 185e-6);
        let theta: Vec<f64> = (0..8).map(|k| k as f64 * PI / 4.0).collect();
        let map = robustness_scan(&family, 9e-3, &ErrorAxis::PulseLength(vec![0.0, 0.2]), &theta, &ControlErrorModel::default(), None)
            .unwrap();
        assert_eq!(map.values.len(), 8);
        for row in &map.values {
            assert!(row[0] < 1e-9);
            assert!((0.0..=1.0).contains(&row[1]));
        }
    }

    #[test]
    fn csv_is_long_format() {
        let family = SequenceFamily::cpmg(2, 0.0);
        let map = robustness_scan(&family, 1e-3, &ErrorAxis::Detuning(vec![0.0, 10.0, 20.0]), &[FRAC_PI_2, PI], &ControlErrorModel::default(), None)
            .unwrap();
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.starts_with("theta0_rad,error_param,bright_population"));
    }
}
