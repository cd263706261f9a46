use serde::{Deserialize, Serialize};

use crate::coherence::{chi_many, CoherenceCurve};
use crate::error::{Error, Result};
use crate::noise::{SpectrumModel, SpectrumShape};
use crate::quadrature::QuadratureConfig;
use crate::sequences::{SequenceFamily, SequenceLayout};

const COARSE_ALPHA: usize = 161;
const COARSE_GAMMA: usize = 41;
const GOLDEN_STEPS: usize = 80;
const POLISH_STEPS: usize = 60;

/// Search brackets and switches for [`fit_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Fit the common spur weight `γ` as a second parameter. Otherwise the
    /// base model's spur weights are used as given.
    pub fit_gamma: bool,
    pub alpha_bracket: (f64, f64),
    pub gamma_bracket: (f64, f64),
    pub quadrature: QuadratureConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            fit_gamma: false,
            alpha_bracket: (1e-4, 1e4),
            gamma_bracket: (0.0, 1.0),
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Least-squares noise-scale fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub alpha_uncertainty: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_uncertainty: Option<f64>,
    /// Residual sum of squares in error probability.
    pub rss: f64,
    pub iterations: usize,
}

/// Error probabilities against a model linear in `α` and `α·γ`:
/// `p(τ) = ½ (1 − exp(−α χ₀(τ) − α γ χ_s(τ)))`.
#[derive(Debug, Clone)]
pub struct LinearExponentFit<'a> {
    pub measured: &'a [f64],
    pub chi0: &'a [f64],
    /// Per-unit-weight spur contribution, when `γ` is free.
    pub chi_spur: Option<&'a [f64]>,
}

impl LinearExponentFit<'_> {
    fn exponent(&self, i: usize, gamma: f64) -> f64 {
        self.chi0[i] + self.chi_spur.map_or(0.0, |s| gamma * s[i])
    }

    fn rss(&self, alpha: f64, gamma: f64) -> f64 {
        (0..self.measured.len())
            .map(|i| {
                let r = self.measured[i] - 0.5 * (1.0 - (-alpha * self.exponent(i, gamma)).exp());
                r * r
            })
            .sum()
    }

    /// Residuals and the Jacobian of the model in `(α, γ)`.
    fn linearize(&self, alpha: f64, gamma: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
        (0..self.measured.len())
            .map(|i| {
                let x = self.exponent(i, gamma);
                let decay = 0.5 * (-alpha * x).exp();
                let r = self.measured[i] - (0.5 - decay);
                let ds = self.chi_spur.map_or(0.0, |s| decay * alpha * s[i]);
                (r, [decay * x, ds])
            })
            .unzip()
    }

    fn best_alpha(&self, gamma: f64, bracket: (f64, f64), iterations: &mut usize) -> f64 {
        let (lo, hi) = (bracket.0.ln(), bracket.1.ln());
        let grid: Vec<f64> = (0..COARSE_ALPHA).map(|k| lo + (hi - lo) * k as f64 / (COARSE_ALPHA - 1) as f64).collect();
        let k = argmin(grid.iter().map(|&u| self.rss(u.exp(), gamma)));
        let a = grid[k.saturating_sub(1)];
        let b = grid[(k + 1).min(COARSE_ALPHA - 1)];
        let u = golden(|u| self.rss(u.exp(), gamma), a, b, iterations);
        let mut alpha = u.exp();
        // Gauss–Newton along α.
        let mut current = self.rss(alpha, gamma);
        for _ in 0..POLISH_STEPS {
            let (r, j) = self.linearize(alpha, gamma);
            let jtj: f64 = j.iter().map(|g| g[0] * g[0]).sum();
            let jtr: f64 = j.iter().zip(&r).map(|(g, r)| g[0] * r).sum();
            if !(jtj > 0.0) {
                break;
            }
            let next = (alpha + jtr / jtj).clamp(bracket.0, bracket.1);
            let trial = self.rss(next, gamma);
            *iterations += 1;
            if !(trial < current) {
                break;
            }
            alpha = next;
            current = trial;
        }
        alpha
    }

    /// Global minimum of the residual on the brackets.
    pub fn solve(&self, options: &FitOptions) -> Result<FitResult> {
        let m = self.measured.len();
        if self.chi0.len() != m || self.chi_spur.is_some_and(|s| s.len() != m) {
            return Err(Error::invalid("measured", "curve and model lengths differ"));
        }
        let (a_lo, a_hi) = options.alpha_bracket;
        if !(a_lo > 0.0 && a_hi > a_lo && a_hi.is_finite()) {
            return Err(Error::invalid("alpha_bracket", "need 0 < lo < hi < inf"));
        }
        let mut iterations = 0;
        let (alpha, gamma) = match self.chi_spur {
            None => (self.best_alpha(0.0, options.alpha_bracket, &mut iterations), 0.0),
            Some(_) => {
                let (g_lo, g_hi) = options.gamma_bracket;
                if !(g_lo >= 0.0 && g_hi > g_lo && g_hi.is_finite()) {
                    return Err(Error::invalid("gamma_bracket", "need 0 <= lo < hi < inf"));
                }
                let profile = |g: f64, it: &mut usize| {
                    let a = self.best_alpha(g, options.alpha_bracket, it);
                    (self.rss(a, g), a)
                };
                let grid: Vec<f64> = (0..COARSE_GAMMA).map(|k| g_lo + (g_hi - g_lo) * k as f64 / (COARSE_GAMMA - 1) as f64).collect();
                let k = argmin(grid.iter().map(|&g| profile(g, &mut iterations).0));
                let (a, b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(COARSE_GAMMA - 1)]);
                let mut inner = 0;
                let gamma = golden(|g| profile(g, &mut inner).0, a, b, &mut iterations);
                iterations += inner;
                let alpha = profile(gamma, &mut iterations).1;
                self.polish(alpha, gamma, options, &mut iterations)
            }
        };
        let (r, j) = self.linearize(alpha, gamma);
        let rss: f64 = r.iter().map(|r| r * r).sum();
        let params = if self.chi_spur.is_some() { 2 } else { 1 };
        let s2 = rss / (m.saturating_sub(params)).max(1) as f64;
        let (alpha_uncertainty, gamma_uncertainty) = if params == 1 {
            let jtj: f64 = j.iter().map(|g| g[0] * g[0]).sum();
            ((s2 / jtj).sqrt(), None)
        } else {
            let (a, b, c) = j.iter().fold((0.0, 0.0, 0.0), |(a, b, c), g| (a + g[0] * g[0], b + g[0] * g[1], c + g[1] * g[1]));
            let det = a * c - b * b;
            ((s2 * c / det).abs().sqrt(), Some((s2 * a / det).abs().sqrt()))
        };
        Ok(FitResult {
            alpha,
            gamma: self.chi_spur.map(|_| gamma),
            alpha_uncertainty: finite_or_zero(alpha_uncertainty),
            gamma_uncertainty: gamma_uncertainty.map(finite_or_zero),
            rss,
            iterations,
        })
    }

    fn polish(&self, mut alpha: f64, mut gamma: f64, options: &FitOptions, iterations: &mut usize) -> (f64, f64) {
        let mut current = self.rss(alpha, gamma);
        for _ in 0..POLISH_STEPS {
            let (r, j) = self.linearize(alpha, gamma);
            let (a, b, c) = j.iter().fold((0.0, 0.0, 0.0), |(a, b, c), g| (a + g[0] * g[0], b + g[0] * g[1], c + g[1] * g[1]));
            let (ra, rg) = j.iter().zip(&r).fold((0.0, 0.0), |(x, y), (g, r)| (x + g[0] * r, y + g[1] * r));
            let det = a * c - b * b;
            if !(det > 0.0) {
                break;
            }
            let next_alpha = (alpha + (c * ra - b * rg) / det).clamp(options.alpha_bracket.0, options.alpha_bracket.1);
            let next_gamma = (gamma + (a * rg - b * ra) / det).clamp(options.gamma_bracket.0, options.gamma_bracket.1);
            let trial = self.rss(next_alpha, next_gamma);
            *iterations += 1;
            if !(trial < current) {
                break;
            }
            (alpha, gamma, current) = (next_alpha, next_gamma, trial);
        }
        (alpha, gamma)
    }
}

fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, v) in values.enumerate() {
        if v < best.1 {
            best = (k, v);
        }
    }
    best.0
}

fn golden(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iterations: &mut usize) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_STEPS {
        if (b - a).abs() <= 1e-14 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        *iterations += 1;
        if fc < fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

fn layouts_for(family: &SequenceFamily, taus: &[f64]) -> Result<Vec<SequenceLayout>> {
    taus.iter().map(|&t| family.layout(t).map_err(|e| e.at_tau(t))).collect()
}

fn has_spurs(model: &SpectrumModel) -> bool {
    matches!(&model.shape, SpectrumShape::Ambient { spurs, .. } if !spurs.is_empty())
}

/// Fits the noise scale `α` (and optionally the spur weight `γ`) of `base`
/// to a measured curve by least squares on error probability.
pub fn fit_alpha(measured: &CoherenceCurve, family: &SequenceFamily, base: &SpectrumModel, options: &FitOptions) -> Result<FitResult> {
    if measured.points.len() < 4 {
        return Err(Error::invalid("measured", format!("need at least 4 points, got {}", measured.points.len())));
    }
    let w: Vec<f64> = measured.points.iter().map(|p| p.w).collect();
    if w.iter().all(|&w| w > 1.0 - 1e-9) || w.iter().all(|&w| w < 1e-9) {
        return Err(Error::Unidentifiable("every point is fully coherent or fully decayed".into()));
    }
    let layouts = layouts_for(family, &measured.taus())?;
    let probabilities = measured.error_probabilities();
    let chi = |m: &SpectrumModel| -> Result<Vec<f64>> {
        Ok(chi_many(&layouts, m, &options.quadrature)?.into_iter().map(|c| c.chi).collect())
    };
    let (chi0, chi_spur) = if options.fit_gamma {
        if !has_spurs(base) {
            return Err(Error::Unidentifiable("gamma requested but the base model has no spur".into()));
        }
        (chi(&base.without_spurs())?, Some(chi(&base.spurs_only())?))
    } else {
        (chi(base)?, None)
    };
    if chi0.iter().all(|&c| c == 0.0) {
        return Err(Error::Unidentifiable("base model predicts no decay on this grid".into()));
    }
    LinearExponentFit { measured: &probabilities, chi0: &chi0, chi_spur: chi_spur.as_deref() }.solve(options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::{CoherenceCurve, CoherencePoint};

    #[test]
    fn exact_recovery_one_parameter() {
        let chi0: Vec<f64> = (1..=8).map(|k| 0.02 * (k * k) as f64).collect();
        let p: Vec<f64> = chi0.iter().map(|c| 0.5 * (1.0 - (-2.3 * c).exp())).collect();
        let fit = LinearExponentFit { measured: &p, chi0: &chi0, chi_spur: None }.solve(&FitOptions::default()).unwrap();
        assert!((fit.alpha - 2.3).abs() < 1e-12 * 2.3, "{fit:?}");
        assert!(fit.rss < 1e-28);
    }

    #[test]
    fn exact_recovery_two_parameters() {
        let chi0: Vec<f64> = (1..=10).map(|k| 0.01 * (k * k) as f64).collect();
        let chis: Vec<f64> = (1..=10).map(|k| 0.3 * (k as f64 * 0.7).sin().powi(2)).collect();
        let p: Vec<f64> = chi0.iter().zip(&chis).map(|(c, s)| 0.5 * (1.0 - (-1.7 * (c + 0.15 * s)).exp())).collect();
        let options = FitOptions { fit_gamma: true, ..Default::default() };
        let fit = LinearExponentFit { measured: &p, chi0: &chi0, chi_spur: Some(&chis) }.solve(&options).unwrap();
        assert!((fit.alpha - 1.7).abs() < 1e-9, "{fit:?}");
        assert!((fit.gamma.unwrap() - 0.15).abs() < 1e-9, "{fit:?}");
    }

    #[test]
    fn degenerate_curves_are_rejected() {
        let curve = CoherenceCurve::from_points((1..=5).map(|k| CoherencePoint::from_coherence(k as f64 * 1e-3, 1.0)).collect());
        let err = fit_alpha(&curve, &SequenceFamily::cpmg(2, 0.0), &SpectrumModel::ohmic(1.0, 3e3), &FitOptions::default());
        assert!(matches!(err, Err(Error::Unidentifiable(_))));
        let short = CoherenceCurve::from_points(vec![CoherencePoint::from_coherence(1e-3, 0.5); 3]);
        assert!(fit_alpha(&short, &SequenceFamily::cpmg(2, 0.0), &SpectrumModel::ohmic(1.0, 3e3), &FitOptions::default()).is_err());
    }

    #[test]
    fn minimum_at_bracket_edge_is_returned() {
        let chi0 = [0.1f64, 0.2, 0.3, 0.4];
        let p: Vec<f64> = chi0.iter().map(|c| 0.5 * (1.0 - (-50.0 * c).exp())).collect();
        let options = FitOptions { alpha_bracket: (0.1, 10.0), ..Default::default() };
        let fit = LinearExponentFit { measured: &p, chi0: &chi0, chi_spur: None }.solve(&options).unwrap();
        assert_eq!(fit.alpha, 10.0);
    }
}
