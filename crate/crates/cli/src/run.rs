//! Executes a resolved configuration into in-memory output files.

use std::f64::consts::TAU;
use std::io::BufReader;
use std::path::Path;

use ddsim::analysis::{compare_sequences, fit_alpha, scaling_study, ScalingConfig, TauGrid};
use ddsim::coherence::{chi_many, coherence_curve};
use ddsim::filter::{filter_curve, write_filter_csv};
use ddsim::montecarlo::{ensemble_coherence_many, robustness_scan, ErrorAxis, ScanNoise, MIN_SAMPLES_PER_WINDOW};
use ddsim::noise::{mean_periodogram, periodogram_bins, write_trace_csv};
use ddsim::{CoherenceCurve, EnsembleConfig, NoiseTrace, SequenceFamily, SequenceLayout, TraceSynthesizer};
use serde_json::{json, Value};

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::parse::log_space;

/// Named output files and a JSON summary for stdout.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
}

impl Outputs {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> ddsim::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn write_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn layouts(family: &SequenceFamily, taus: &[f64]) -> CliResult<Vec<SequenceLayout>> {
    taus.iter().map(|&t| family.layout(t).map_err(CliError::Core)).collect()
}

/// Shortest free window over the layouts divided by the samples-per-window floor.
pub fn auto_dt(layouts: &[SequenceLayout]) -> f64 {
    let shortest = layouts
        .iter()
        .flat_map(|l| l.free_intervals())
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    shortest / MIN_SAMPLES_PER_WINDOW
}

/// Reads a `t_s,beta_rad_s` trace file.
pub fn read_trace_csv(path: &Path) -> CliResult<NoiseTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (mut t, mut beta) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let mut cols = line.split(',').map(|p| p.trim().parse::<f64>());
        match (cols.next(), cols.next()) {
            (Some(Ok(a)), Some(Ok(b))) => {
                t.push(a);
                beta.push(b);
            }
            _ => return Err(CliError::io(path, format!("line {}: expected two numbers", i + 1))),
        }
    }
    if t.len() < 2 {
        return Err(CliError::io(path, "need at least two samples"));
    }
    Ok(NoiseTrace::from_samples(t[1] - t[0], beta)?)
}

pub fn execute(config: &RunConfig) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    match config {
        RunConfig::Sequence(c) => {
            let layout = c.family.family()?.layout(c.tau)?;
            let rows = layout.fractions.iter().zip(&layout.axis_plan).enumerate().map(|(j, (d, axis))| {
                vec![(j + 1).to_string(), d.to_string(), (d * layout.tau).to_string(), format!("{axis:?}")]
            });
            out.add("layout.csv", write_rows(&["pulse", "center_fraction", "center_s", "axis"], rows));
            out.add("layout.json", layout.to_json()?.into_bytes());
            out.summary = json!({ "n": layout.n, "tau_s": layout.tau, "free_intervals_s": layout.free_intervals() });
        }
        RunConfig::Filter(c) => {
            let layout = c.family.family()?.layout(c.tau)?;
            if c.points < 2 || !(c.omega_tau_min > 0.0 && c.omega_tau_max > c.omega_tau_min) {
                return Err(CliError::Config("need points >= 2 and 0 < omega_tau_min < omega_tau_max".into()));
            }
            let omegas: Vec<f64> = log_space(c.omega_tau_min, c.omega_tau_max, c.points).iter().map(|x| x / c.tau).collect();
            let samples = filter_curve(&layout, &omegas)?;
            out.add("filter.csv", csv_bytes(|b| write_filter_csv(&samples, b))?);
            out.summary = json!({ "points": samples.len() });
        }
        RunConfig::NoiseSynth(c) => {
            let synth = TraceSynthesizer::new(&c.model, c.duration, c.dt)?;
            for k in 0..c.traces.max(1) {
                let trace = synth.trace(c.seed, k as u64);
                let name = if c.traces <= 1 { "trace.csv".to_string() } else { format!("trace_{k:04}.csv") };
                out.add(&name, csv_bytes(|b| write_trace_csv(&trace, b))?);
            }
            out.summary = json!({ "traces": c.traces.max(1), "samples": synth.len(), "dt_s": c.dt });
        }
        RunConfig::NoisePsd(c) => {
            let support = c.model.support();
            let lo = c.omega_min.unwrap_or(support.lo);
            let hi = c.omega_max.unwrap_or(support.hi);
            if c.points < 2 || !(lo > 0.0 && hi > lo) {
                return Err(CliError::Config("need points >= 2 and 0 < omega_min < omega_max".into()));
            }
            let rows = log_space(lo, hi, c.points)
                .into_iter()
                .map(|w| Ok(vec![w.to_string(), (w / TAU).to_string(), c.model.psd(w)?.to_string()]))
                .collect::<CliResult<Vec<_>>>()?;
            out.add("psd.csv", write_rows(&["omega_rad_s", "freq_hz", "psd"], rows));
            out.summary = json!({ "points": c.points });
        }
        RunConfig::NoisePeriodogram(c) => {
            let (traces, target) = if c.inputs.is_empty() {
                let s = &c.synth;
                let synth = TraceSynthesizer::new(&s.model, s.duration, s.dt)?;
                ((0..s.traces.max(1) as u64).map(|k| synth.trace(s.seed, k)).collect::<Vec<_>>(), Some(&s.model))
            } else {
                (c.inputs.iter().map(|p| read_trace_csv(p)).collect::<CliResult<Vec<_>>>()?, None)
            };
            let (omega, _) = periodogram_bins(&traces[0])?;
            let mean = mean_periodogram(&traces)?;
            let rows = omega
                .iter()
                .map(|&w| {
                    let mut row = vec![w.to_string(), mean.psd(w)?.to_string()];
                    if let Some(m) = target {
                        row.push(m.psd(w)?.to_string());
                    }
                    Ok(row)
                })
                .collect::<CliResult<Vec<_>>>()?;
            let header: &[&str] = if target.is_some() { &["omega_rad_s", "psd_estimate", "psd_target"] } else { &["omega_rad_s", "psd_estimate"] };
            out.add("periodogram.csv", write_rows(header, rows));
            out.summary = json!({ "traces": traces.len(), "bins": omega.len() });
        }
        RunConfig::Coherence(c) => {
            let curve = coherence_curve(&c.family.family()?, &c.model, &c.taus, &c.quadrature)?;
            out.add("coherence.csv", csv_bytes(|b| curve.write_csv(b))?);
            out.summary = json!({ "points": curve.points.len() });
        }
        RunConfig::Ensemble(c) => {
            let family = c.family.family()?;
            let mut taus = c.taus.clone();
            taus.sort_by(f64::total_cmp);
            let layouts = layouts(&family, &taus)?;
            let dt = c.dt.unwrap_or_else(|| auto_dt(&layouts));
            let mut ens = EnsembleConfig::new(c.realizations, c.seed, dt);
            ens.duration = c.duration;
            ens.batches = c.batches;
            let estimates = ensemble_coherence_many(&layouts, &c.model, &ens)?;
            let chis = chi_many(&layouts, &c.model, &c.quadrature)?;
            let rows = estimates.iter().zip(&chis).map(|(e, x)| {
                vec![
                    e.tau.to_string(),
                    e.w.to_string(),
                    e.stderr.to_string(),
                    e.half_mean_square.to_string(),
                    e.half_mean_square_stderr.to_string(),
                    x.chi.to_string(),
                    (-x.chi).exp().to_string(),
                ]
            });
            out.add(
                "ensemble.csv",
                write_rows(&["tau_s", "W_mc", "stderr", "half_mean_sq_phase", "half_mean_sq_stderr", "chi", "W_theory"], rows),
            );
            out.summary = json!({ "points": estimates.len(), "realizations": c.realizations, "dt_s": dt });
        }
        RunConfig::Robustness(c) => {
            let family = c.family.family()?;
            let axis = match c.error_kind {
                ErrorKind::PulseLength => ErrorAxis::PulseLength(c.errors.clone()),
                ErrorKind::Detuning => ErrorAxis::Detuning(c.errors.clone()),
            };
            let ens = EnsembleConfig::new(c.realizations, c.seed, c.dt);
            let noise = c.model.as_ref().map(|model| ScanNoise { model, ensemble: &ens });
            let map = robustness_scan(&family, c.tau, &axis, &c.theta0, &c.base, noise)?;
            out.add("robustness.csv", csv_bytes(|b| map.write_csv(b))?);
            let worst = map.values.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
            out.summary = json!({ "cells": map.theta0.len() * c.errors.len(), "max_bright_population": worst });
        }
        RunConfig::Fit(c) => {
            let file = std::fs::File::open(&c.measured).map_err(|e| CliError::io(&c.measured, e))?;
            let measured = CoherenceCurve::read_csv(BufReader::new(file))?;
            let family = c.family.family()?;
            let fit = fit_alpha(&measured, &family, &c.model, &c.options)?;
            let fitted_model = fitted(&c.model, fit.alpha, fit.gamma);
            let curve = coherence_curve(&family, &fitted_model, &measured.taus(), &c.options.quadrature)?;
            let rows = measured.points.iter().zip(&curve.points).map(|(m, f)| {
                vec![m.tau.to_string(), m.error_probability.to_string(), f.error_probability.to_string()]
            });
            out.add("fit.csv", write_rows(&["tau_s", "measured_error_prob", "fitted_error_prob"], rows));
            out.add("fit.json", serde_json::to_vec_pretty(&fit)?);
            out.summary = serde_json::to_value(fit)?;
        }
        RunConfig::Scaling(c) => {
            let family = c.family.family()?;
            let mut sc = ScalingConfig {
                amplitudes: c.amplitudes.clone(),
                taus: TauGrid::CoherenceTargets { targets: c.targets.clone(), bracket: c.tau_bracket },
                ensemble: EnsembleConfig::new(c.realizations, c.seed, c.dt.unwrap_or(1.0)),
                fit: c.options,
            };
            sc.ensemble.batches = c.batches;
            if c.dt.is_none() {
                sc.ensemble.dt = scaling_dt(&family, c, &sc)?;
            }
            let study = scaling_study(&family, &c.model, &sc, c.path)?;
            let rows = study.points.iter().map(|p| {
                vec![
                    p.v_n.to_string(),
                    p.alpha.to_string(),
                    p.alpha_uncertainty.to_string(),
                    p.ratio.to_string(),
                    p.error.clone().unwrap_or_default(),
                ]
            });
            out.add("scaling.csv", write_rows(&["v_n", "alpha", "alpha_uncertainty", "ratio", "error"], rows));
            out.add("scaling.json", serde_json::to_vec_pretty(&study)?);
            out.summary = json!({ "slope": study.slope, "slope_stderr": study.slope_stderr });
        }
        RunConfig::Compare(c) => {
            let families: Vec<SequenceFamily> = c.kinds.iter().map(|&k| SequenceFamily::new(k, 0, c.tau_pi)).collect();
            let report = compare_sequences(&families, &c.model, &c.taus, &c.ns, &c.quadrature)?;
            out.add("compare.csv", csv_bytes(|b| report.write_csv(b))?);
            out.add("crossovers.csv", csv_bytes(|b| report.write_crossovers_csv(b))?);
            out.summary = json!({ "crossovers": report.summary().lines().collect::<Vec<_>>() });
        }
    }
    Ok(out)
}

fn fitted(model: &ddsim::SpectrumModel, alpha: f64, gamma: Option<f64>) -> ddsim::SpectrumModel {
    let mut m = model.clone();
    if let (Some(g), ddsim::SpectrumShape::Ambient { spurs, .. }) = (gamma, &mut m.shape) {
        for s in spurs.iter_mut() {
            s.weight = g;
        }
    }
    m.scale *= alpha.sqrt();
    m
}

fn scaling_dt(family: &SequenceFamily, c: &ScalingRunConfig, sc: &ScalingConfig) -> CliResult<f64> {
    // The shortest windows belong to the largest amplitude's earliest target.
    let top = c.amplitudes.iter().cloned().fold(0.0, f64::max);
    let first = c.targets.iter().cloned().fold(0.0, f64::max);
    let model = c.model.clone().with_scale(c.model.scale * top);
    let tau = ddsim::analysis::tau_at_chi(family, &model, -first.ln(), c.tau_bracket, &sc.fit.quadrature)?
        .ok_or_else(|| CliError::Config("coherence targets are not reached inside tau_bracket".into()))?;
    Ok(auto_dt(&[family.layout(tau)?]))
}
