//! Dephasing exponent `χ(τ) = (2/π) ∫ S(ω) F(ωτ) / ω² dω` and the coherence
//! `W = e^{-χ}` it predicts.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{closed_form_y, low_frequency_order, taylor_coefficients};
use crate::noise::SpectrumModel;
use crate::quadrature::{integrate, QuadratureConfig};
use crate::sequences::{SequenceFamily, SequenceLayout};

/// Below this `ωτ` the filter is evaluated from its Taylor series, which keeps
/// full relative precision where the closed form cancels.
const SERIES_LIMIT: f64 = 0.1;
const SERIES_TERMS: usize = 24;

/// `F(ωτ)` with accurate small-argument behaviour.
#[derive(Debug, Clone)]
pub struct FilterEvaluator<'a> {
    layout: &'a SequenceLayout,
    order: usize,
    series: Vec<Complex64>,
}

impl<'a> FilterEvaluator<'a> {
    pub fn new(layout: &'a SequenceLayout) -> Self {
        let (order, _) = low_frequency_order(layout);
        let mut series = taylor_coefficients(layout, order + SERIES_TERMS);
        series.iter_mut().take(order).for_each(|c| *c = Complex64::new(0.0, 0.0));
        FilterEvaluator { layout, order, series }
    }

    /// Exponent `m` of `y ~ (ωτ)^m` at small argument.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn f(&self, omega_tau: f64) -> f64 {
        if omega_tau < SERIES_LIMIT {
            let y = self.series.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * omega_tau + c);
            y.norm_sqr()
        } else {
            closed_form_y(self.layout, Complex64::new(omega_tau, 0.0)).norm_sqr()
        }
    }
}

/// A converged `χ` with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub chi: f64,
    pub error: f64,
    pub subdivisions: usize,
}

impl ChiEstimate {
    pub fn coherence(&self) -> f64 {
        (-self.chi).exp()
    }
}

/// Panel boundaries: log-spaced over the support, a uniform grid on the
/// `π/τ` oscillation scale, and the model's own features.
fn panel_points(layout: &SequenceLayout, model: &SpectrumModel, lo: f64, hi: f64, config: &QuadratureConfig) -> Vec<f64> {
    let mut points = vec![lo, hi];
    let log_start = if lo > 0.0 { lo } else { (1e-6 / layout.tau).min(hi * 1e-9) };
    points.push(log_start);
    let decades = (hi / log_start).log10();
    let count = (decades * config.panels_per_decade as f64).ceil().max(1.0) as usize;
    points.extend((1..count).map(|k| log_start * (hi / log_start).powf(k as f64 / count as f64)));
    let spacing = PI / layout.tau;
    let first = (lo / spacing).floor() as usize + 1;
    points.extend((first..first + config.max_uniform_panels).map(|k| k as f64 * spacing).take_while(|&w| w < hi));
    points.extend(model.features());
    points.retain(|&w| w >= lo && w <= hi && w.is_finite());
    points.sort_by(f64::total_cmp);
    points.dedup_by(|b, a| (*b - *a) <= 1e-12 * a.abs().max(f64::MIN_POSITIVE));
    points
}

/// `χ` for one layout under `model`.
pub fn chi(layout: &SequenceLayout, model: &SpectrumModel, config: &QuadratureConfig) -> Result<ChiEstimate> {
    let support = model.support();
    if model.scale == 0.0 || !(support.hi > support.lo) {
        return Ok(ChiEstimate { chi: 0.0, error: 0.0, subdivisions: 0 });
    }
    let filter = FilterEvaluator::new(layout);
    if support.lo <= 0.0 {
        // S F / ω² ~ ω^(p - 2 + 2m) near zero.
        let exponent = model.infrared_exponent() - 2.0 + 2.0 * filter.order() as f64;
        if exponent <= -1.0 {
            return Err(Error::Divergent { exponent });
        }
    }
    let tau = layout.tau;
    let integrand = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let s = model.psd_unchecked(w);
        if s == 0.0 {
            0.0
        } else {
            (2.0 / PI) * s * filter.f(w * tau) / (w * w)
        }
    };
    let points = panel_points(layout, model, support.lo.max(0.0), support.hi, config);
    let q = integrate(integrand, &points, config)?;
    let chi = if q.value < 0.0 {
        if q.value.abs() < 1e-12 {
            0.0
        } else {
            return Err(Error::NegativeChi(q.value));
        }
    } else {
        q.value
    };
    Ok(ChiEstimate { chi, error: q.error, subdivisions: q.subdivisions })
}

/// One point of a decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub tau: f64,
    pub chi: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub error_probability: f64,
}

impl CoherencePoint {
    pub fn from_chi(tau: f64, chi: f64) -> Self {
        let w = (-chi).exp();
        CoherencePoint { tau, chi, w, error_probability: 0.5 * (1.0 - w) }
    }

    /// A point known only through its coherence (e.g. a measurement).
    pub fn from_coherence(tau: f64, w: f64) -> Self {
        let chi = if w > 0.0 { -w.ln() } else { f64::INFINITY };
        CoherencePoint { tau, chi, w, error_probability: 0.5 * (1.0 - w) }
    }
}

/// Predicted or measured coherence versus total sequence time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceCurve {
    pub points: Vec<CoherencePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<SequenceFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SpectrumModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureConfig>,
}

impl CoherenceCurve {
    pub fn from_points(points: Vec<CoherencePoint>) -> Self {
        CoherenceCurve { points, family: None, model: None, quadrature: None }
    }

    pub fn taus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    pub fn error_probabilities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.error_probability).collect()
    }

    /// Writes `tau_s,chi,W,error_prob` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["tau_s", "chi", "W", "error_prob"])?;
        for p in &self.points {
            out.write_record([p.tau.to_string(), p.chi.to_string(), p.w.to_string(), p.error_probability.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a curve written by [`write_csv`](Self::write_csv). Only `tau_s`
    /// and one of `W` / `error_prob` are required.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let tau_col = col("tau_s").ok_or_else(|| Error::Parse("missing tau_s column".into()))?;
        let (w_col, p_col) = (col("W"), col("error_prob"));
        if w_col.is_none() && p_col.is_none() {
            return Err(Error::Parse("need a W or error_prob column".into()));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let mut points = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let tau = parse(&row[tau_col])?;
            let w = match w_col {
                Some(c) => parse(&row[c])?,
                None => 1.0 - 2.0 * parse(&row[p_col.unwrap()])?,
            };
            points.push(CoherencePoint::from_coherence(tau, w));
        }
        Ok(Self::from_points(points))
    }
}

/// `χ` for each layout, in input order.
pub fn chi_many(layouts: &[SequenceLayout], model: &SpectrumModel, config: &QuadratureConfig) -> Result<Vec<ChiEstimate>> {
    layouts
        .par_iter()
        .map(|layout| chi(layout, model, config).map_err(|e| e.at_tau(layout.tau)))
        .collect()
}

/// Predicted decay of `family` under `model` at each `τ`.
pub fn coherence_curve(
    family: &SequenceFamily,
    model: &SpectrumModel,
    taus: &[f64],
    config: &QuadratureConfig,
) -> Result<CoherenceCurve> {
    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by(|&a, &b| taus[a].total_cmp(&taus[b]));
    let points = order
        .par_iter()
        .map(|&k| {
            let tau = taus[k];
            let layout = family.layout(tau).map_err(|e| e.at_tau(tau))?;
            let est = chi(&layout, model, config).map_err(|e| e.at_tau(tau))?;
            Ok(CoherencePoint::from_chi(tau, est.chi))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoherenceCurve { points, family: Some(family.clone()), model: Some(model.clone()), quadrature: Some(*config) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::filter_closed_form;
    use crate::noise::{Band, Spur};
    use crate::sequences::{build_layout, SequenceKind};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn layout(kind: SequenceKind, n: usize, tau: f64) -> SequenceLayout {
        build_layout(&SequenceFamily::new(kind, n, 0.0), tau).unwrap()
    }

    #[test]
    fn series_matches_closed_form_at_the_switch() {
        for (kind, n) in [(SequenceKind::Cpmg, 3), (SequenceKind::Udd, 7), (SequenceKind::Cpmg, 0)] {
            let l = layout(kind, n, 1e-3);
            let eval = FilterEvaluator::new(&l);
            let x = SERIES_LIMIT * (1.0 - 1e-12);
            let closed = filter_closed_form(&l, x).f;
            assert_relative_eq!(eval.f(x), closed, max_relative = 1e-6);
        }
    }

    #[test]
    fn zero_scale_gives_zero() {
        let model = SpectrumModel::ohmic(1.0, TAU * 500.0).with_scale(0.0);
        let est = chi(&layout(SequenceKind::Udd, 4, 1e-2), &model, &QuadratureConfig::default()).unwrap();
        assert_eq!(est.chi, 0.0);
        assert_eq!(est.coherence(), 1.0);
    }

    #[test]
    fn white_free_induction_is_linear_in_tau() {
        // ∫₀^∞ 4 sin²(x/2)/x² dx = π, so χ → 2 S₀ τ for a wide band.
        let s0 = 3.0;
        let tau = 1e-3;
        let model = SpectrumModel::white(s0, Band::new(1e-3, 1e9));
        let est = chi(&layout(SequenceKind::Cpmg, 0, tau), &model, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(est.chi, 2.0 * s0 * tau, max_relative = 1e-4);
    }

    #[test]
    fn narrow_line_limit() {
        // A line of power P at ω₀ gives χ → (2/π) P F(ω₀τ) / ω₀².
        let l = layout(SequenceKind::Cpmg, 2, 2e-3);
        let center = TAU * 700.0;
        let model = SpectrumModel::ambient(1.0, 1.0, vec![Spur { center, weight: 1.0, fwhm: 1e-3 }])
            .with_band(Band::new(TAU * 100.0, TAU * 1e4));
        let spur = model.spurs_only();
        let power = spur.background_power();
        let est = chi(&l, &spur, &QuadratureConfig::default()).unwrap();
        let expected = (2.0 / PI) * power * filter_closed_form(&l, center * l.tau).f / (center * center);
        assert_relative_eq!(est.chi, expected, max_relative = 1e-6);
    }

    #[test]
    fn divergence_is_reported() {
        // Free induction (y ~ x) with 1/ω noise down to zero frequency.
        let model = SpectrumModel::power_law(-1.0, 1.0, 1.0).with_band(Band::new(0.0, 1e3));
        let err = chi(&layout(SequenceKind::Cpmg, 0, 1e-3), &model, &QuadratureConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Divergent { .. }));
        // An echo (y ~ x²) makes the same spectrum integrable.
        assert!(chi(&layout(SequenceKind::Cpmg, 1, 1e-3), &model, &QuadratureConfig::default()).is_ok());
    }

    #[test]
    fn curve_is_sorted_and_consistent() {
        let family = SequenceFamily::udd(3, 0.0);
        let model = SpectrumModel::ohmic(50.0, TAU * 500.0);
        let curve = coherence_curve(&family, &model, &[4e-3, 1e-3, 2e-3], &QuadratureConfig::default()).unwrap();
        assert_eq!(curve.taus(), vec![1e-3, 2e-3, 4e-3]);
        for p in &curve.points {
            assert_eq!(p.w, (-p.chi).exp());
            assert_eq!(p.error_probability, 0.5 * (1.0 - p.w));
        }
    }

    #[test]
    fn csv_round_trip() {
        let curve = CoherenceCurve::from_points(vec![CoherencePoint::from_chi(1e-3, 0.1), CoherencePoint::from_chi(2e-3, 0.4)]);
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let back = CoherenceCurve::read_csv(buf.as_slice()).unwrap();
        for (a, b) in curve.points.iter().zip(&back.points) {
            assert_eq!(a.tau, b.tau);
            assert_relative_eq!(a.chi, b.chi, max_relative = 1e-12);
        }
    }
}
