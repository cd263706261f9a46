use serde::{Deserialize, Serialize};

use super::compare::tau_at_chi;
use super::fit::{FitOptions, LinearExponentFit};
use crate::coherence::chi_many;
use crate::error::{Error, Result};
use crate::montecarlo::{realize_phases, summarize_phases, EnsembleConfig};
use crate::noise::SpectrumModel;
use crate::sequences::{SequenceFamily, SequenceLayout};

/// How the `τ` grid is chosen at each amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauGrid {
    /// The same grid for every amplitude.
    Fixed { taus: Vec<f64> },
    /// Per amplitude, the `τ` at which the predicted coherence equals each
    /// target, searched on `bracket`.
    CoherenceTargets { targets: Vec<f64>, bracket: (f64, f64) },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingPath {
    /// Curves from `χ` linearity alone.
    Analytic,
    /// Curves from Monte Carlo ensembles.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    /// `V_N` values; the first is the reference.
    pub amplitudes: Vec<f64>,
    pub taus: TauGrid,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub v_n: f64,
    pub taus: Vec<f64>,
    pub alpha: f64,
    pub alpha_uncertainty: f64,
    /// `α / α_reference`.
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub path: ScalingPath,
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln α` against `ln V_N` over the fitted points.
    pub slope: f64,
    pub slope_stderr: f64,
}

/// Slope and its standard error for a straight-line fit of `y` on `x`.
pub fn regression_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, 0.0);
    }
    let resid: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, (resid / (n - 2.0) / sxx).sqrt())
}

fn grid_for(v: f64, family: &SequenceFamily, template: &SpectrumModel, grid: &TauGrid, fit: &FitOptions) -> Result<Vec<f64>> {
    match grid {
        TauGrid::Fixed { taus } => Ok(taus.clone()),
        TauGrid::CoherenceTargets { targets, bracket } => {
            let model = template.clone().with_scale(template.scale * v);
            targets
                .iter()
                .map(|&w| {
                    if !(w > 0.0 && w < 1.0) {
                        return Err(Error::invalid("targets", "coherence targets must lie in (0, 1)"));
                    }
                    tau_at_chi(family, &model, -w.ln(), *bracket, &fit.quadrature)?
                        .ok_or_else(|| Error::invalid("bracket", format!("coherence {w} is not crossed inside the bracket at V_N = {v}")))
                })
                .collect()
        }
    }
}

/// Fitted noise scale versus amplitude `V_N`.
///
/// Every point is fitted against `χ₀` of `template` as given. On the Monte
/// Carlo path all amplitudes share one set of noise streams: a trace
/// synthesized at `V_N` is `V_N` times the trace at unit amplitude from the
/// same seed, so phases are computed once and scaled.
pub fn scaling_study(family: &SequenceFamily, template: &SpectrumModel, config: &ScalingConfig, path: ScalingPath) -> Result<ScalingStudy> {
    let amps = &config.amplitudes;
    if amps.len() < 3 {
        return Err(Error::invalid("amplitudes", "need at least three V_N values"));
    }
    if amps.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("amplitudes", "V_N values must be positive and finite"));
    }
    let grids = amps
        .iter()
        .map(|&v| grid_for(v, family, template, &config.taus, &config.fit))
        .collect::<Result<Vec<_>>>()?;
    let layouts: Vec<Vec<SequenceLayout>> = grids
        .iter()
        .map(|g| g.iter().map(|&t| family.layout(t).map_err(|e| e.at_tau(t))).collect())
        .collect::<Result<_>>()?;
    let flat: Vec<SequenceLayout> = layouts.iter().flatten().cloned().collect();
    let chi0: Vec<f64> = chi_many(&flat, template, &config.fit.quadrature)?.into_iter().map(|c| c.chi).collect();
    let phases = match path {
        ScalingPath::Analytic => None,
        ScalingPath::MonteCarlo => Some(realize_phases(&flat, template, &config.ensemble)?),
    };
    let mut offset = 0;
    let mut fitted = Vec::new();
    for (k, (&v, taus)) in amps.iter().zip(&grids).enumerate() {
        let cols = offset..offset + taus.len();
        offset += taus.len();
        let chi_v = &chi0[cols.clone()];
        let measured: Vec<f64> = match &phases {
            None => chi_v.iter().map(|c| 0.5 * (1.0 - (-v * v * c).exp())).collect(),
            Some(matrix) => cols
                .map(|j| {
                    let column: Vec<f64> = matrix.iter().map(|row| v * row[j]).collect();
                    0.5 * (1.0 - summarize_phases(0.0, &column, config.ensemble.batches).w)
                })
                .collect(),
        };
        let fit = if measured.len() < 4 {
            Err(Error::invalid("taus", "need at least 4 points per amplitude"))
        } else {
            LinearExponentFit { measured: &measured, chi0: chi_v, chi_spur: None }.solve(&FitOptions { fit_gamma: false, ..config.fit })
        };
        fitted.push((k, v, taus.clone(), fit));
    }
    let reference = match &fitted[0].3 {
        Ok(f) => f.alpha,
        Err(e) => return Err(Error::Unidentifiable(format!("reference amplitude fit failed: {e}"))),
    };
    let points: Vec<ScalingPoint> = fitted
        .into_iter()
        .map(|(_, v, taus, fit)| match fit {
            Ok(f) => ScalingPoint { v_n: v, taus, alpha: f.alpha, alpha_uncertainty: f.alpha_uncertainty, ratio: f.alpha / reference, error: None },
            Err(e) => ScalingPoint { v_n: v, taus, alpha: f64::NAN, alpha_uncertainty: f64::NAN, ratio: f64::NAN, error: Some(e.to_string()) },
        })
        .collect();
    let good: Vec<&ScalingPoint> = points.iter().filter(|p| p.error.is_none()).collect();
    if good.len() < 2 {
        return Err(Error::Unidentifiable("fewer than two amplitudes could be fitted".into()));
    }
    let x: Vec<f64> = good.iter().map(|p| p.v_n.ln()).collect();
    let y: Vec<f64> = good.iter().map(|p| p.alpha.ln()).collect();
    let (slope, slope_stderr) = regression_slope(&x, &y);
    Ok(ScalingStudy { path, points, slope, slope_stderr })
}
