//! Frequency-domain filter function of a pulse sequence with finite-width π
//! pulses.
//!
//! The toggling function `s(t)` is `+1, -1, +1, ...` on successive
//! free-precession windows and `0` while a pulse is being applied. Its scaled
//! Fourier transform
//!
//! ```text
//! y(ωτ) = iω ∫ s(t) e^{iωt} dt
//! ```
//!
//! has the closed form
//!
//! ```text
//! y = 1 + (-1)^{n+1} e^{iωτ} + 2 Σ_j (-1)^j e^{i δ_j ωτ} cos(ω τ_π / 2)
//! ```
//!
//! up to a global sign, and `F(ωτ) = |y|²`. [`filter_closed_form`] evaluates
//! the formula; [`filter_numeric`] integrates the toggling function segment by
//! segment and is kept as an independent check.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::SequenceLayout;

/// One constant piece of the toggling function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    /// `+1` or `-1` between pulses, `0` during a pulse.
    pub value: i8,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Piecewise-constant toggling function covering `[0, tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToggleFunction {
    pub tau: f64,
    pub segments: Vec<Segment>,
}

impl ToggleFunction {
    /// Value at time `t` (the left-closed segment wins at boundaries).
    pub fn value_at(&self, t: f64) -> i8 {
        self.segments
            .iter()
            .find(|s| t >= s.start && t < s.end)
            .or(self.segments.last().filter(|s| t == s.end))
            .map_or(0, |s| s.value)
    }

    /// Total time during which the toggle is zero.
    pub fn gated_time(&self) -> f64 {
        self.segments.iter().filter(|s| s.value == 0).map(Segment::len).sum()
    }

    /// Free-precession windows only.
    pub fn free_windows(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.value != 0)
    }
}

/// Filter function evaluated at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSample {
    /// Angular frequency in rad/s.
    pub omega: f64,
    pub omega_tau: f64,
    pub y: Complex64,
    /// `|y|²`.
    pub f: f64,
}

impl FilterSample {
    fn new(omega: f64, omega_tau: f64, y: Complex64) -> Self {
        FilterSample { omega, omega_tau, y, f: y.norm_sqr() }
    }
}

/// Toggling function of a validated layout. Zero-length pieces are dropped,
/// but the sign still alternates once per pulse.
pub fn toggle_function(layout: &SequenceLayout) -> ToggleFunction {
    let half = 0.5 * layout.tau_pi;
    let mut segments = Vec::with_capacity(2 * layout.n + 1);
    let mut push = |start: f64, end: f64, value: i8| {
        if end > start {
            segments.push(Segment { start, end, value });
        }
    };
    let mut cursor = 0.0;
    let mut sign = 1i8;
    for center in layout.centers() {
        let (lead, trail) = (center - half, center + half);
        push(cursor, lead, sign);
        push(lead, trail, 0);
        cursor = trail;
        sign = -sign;
    }
    push(cursor, layout.tau, sign);
    ToggleFunction { tau: layout.tau, segments }
}

/// `y` from the closed-form expression at dimensionless frequency `ωτ`.
pub fn filter_closed_form(layout: &SequenceLayout, omega_tau: f64) -> FilterSample {
    let y = closed_form_y(layout, Complex64::new(omega_tau, 0.0));
    FilterSample::new(omega_tau / layout.tau, omega_tau, y)
}

/// Closed-form `y` continued to complex `ωτ`. Used for contour derivatives.
pub fn closed_form_y(layout: &SequenceLayout, x: Complex64) -> Complex64 {
    let i = Complex64::i();
    let half_width = 0.5 * layout.pulse_fraction();
    let parity = if layout.n % 2 == 0 { -1.0 } else { 1.0 };
    let mut sum = Complex64::new(0.0, 0.0);
    for (j, &d) in layout.fractions.iter().enumerate() {
        let term = (i * x * d).exp();
        if j % 2 == 0 {
            sum -= term;
        } else {
            sum += term;
        }
    }
    Complex64::new(1.0, 0.0) + parity * (i * x).exp() + 2.0 * (x * half_width).cos() * sum
}

/// `y` at angular frequency `omega` by exact integration of each toggle
/// segment: a segment `[a, b]` with value `v` contributes
/// `v (e^{iωb} - e^{iωa})`, written as `2i v sin(ω(b-a)/2) e^{iω(a+b)/2}`.
///
/// The result equals the closed form up to an overall sign.
pub fn filter_numeric(layout: &SequenceLayout, omega: f64) -> FilterSample {
    let toggle = toggle_function(layout);
    FilterSample::new(omega, omega * layout.tau, toggle_transform(&toggle, omega))
}

/// `iω ∫ s(t) e^{iωt} dt` of an arbitrary toggling function.
pub fn toggle_transform(toggle: &ToggleFunction, omega: f64) -> Complex64 {
    if omega == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    toggle
        .free_windows()
        .map(|s| {
            let half = 0.5 * omega * s.len();
            let mid = 0.5 * omega * (s.start + s.end);
            Complex64::new(0.0, 2.0 * s.value as f64 * half.sin()) * Complex64::from_polar(1.0, mid)
        })
        .sum()
}

/// Closed-form samples on an ascending grid of angular frequencies.
pub fn filter_curve(layout: &SequenceLayout, omegas: &[f64]) -> Result<Vec<FilterSample>> {
    if let Some(k) = omegas.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::invalid("omega_grid", format!("not ascending at index {}", k + 1)));
    }
    if omegas.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("omega_grid", "frequencies must be finite and >= 0"));
    }
    Ok(omegas.par_iter().map(|&w| filter_closed_form(layout, w * layout.tau)).collect())
}

/// Taylor coefficients of the closed-form `y` about `ωτ = 0`, orders
/// `0..=max_order`, computed from pulse-edge moments.
pub fn taylor_coefficients(layout: &SequenceLayout, max_order: usize) -> Vec<Complex64> {
    let h = 0.5 * layout.pulse_fraction();
    let parity = if layout.n % 2 == 0 { -1.0 } else { 1.0 };
    let mut factorial = 1.0;
    let mut i_power = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(max_order + 1);
    for m in 0..=max_order {
        if m > 0 {
            factorial *= m as f64;
            i_power *= Complex64::i();
        }
        let edges: f64 = layout
            .fractions
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                sign * ((d + h).powi(m as i32) + (d - h).powi(m as i32))
            })
            .sum();
        let moment = if m == 0 { 1.0 + parity + edges } else { parity + edges };
        out.push(i_power * (moment / factorial));
    }
    out
}

/// Lowest order `m` at which `y ~ (ωτ)^m` near zero, with its coefficient.
/// Moments below `tol` relative to their natural scale count as vanished.
pub fn low_frequency_order(layout: &SequenceLayout) -> (usize, Complex64) {
    const MAX_ORDER: usize = 64;
    let coeffs = taylor_coefficients(layout, MAX_ORDER);
    let mut factorial = 1.0;
    for (m, c) in coeffs.iter().enumerate().skip(1) {
        factorial *= m as f64;
        let scale = (2 * layout.n + 1) as f64;
        if (c.norm() * factorial) > 1e-10 * scale {
            return (m, *c);
        }
    }
    (MAX_ORDER, coeffs[MAX_ORDER])
}

/// Derivatives `d^k y / d(ωτ)^k` at zero for `k = 0..=max_order`, computed
/// numerically from samples of the closed form on a circle of radius
/// `max_order` in the complex plane (trapezoid rule on the Cauchy integral).
pub fn derivatives_at_zero(layout: &SequenceLayout, max_order: usize) -> Vec<Complex64> {
    const POINTS: usize = 128;
    let radius = (max_order as f64).max(1.0);
    let samples: Vec<Complex64> = (0..POINTS)
        .map(|m| {
            let z = Complex64::from_polar(radius, std::f64::consts::TAU * m as f64 / POINTS as f64);
            closed_form_y(layout, z)
        })
        .collect();
    let mut factorial = 1.0;
    (0..=max_order)
        .map(|k| {
            if k > 0 {
                factorial *= k as f64;
            }
            let coeff: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(m, f)| {
                    let angle = -std::f64::consts::TAU * (k * m % POINTS) as f64 / POINTS as f64;
                    f * Complex64::from_polar(1.0, angle)
                })
                .sum::<Complex64>()
                / POINTS as f64;
            coeff * factorial / radius.powi(k as i32)
        })
        .collect()
}

/// Writes `omega_rad_s,omega_tau,F` rows with a header.
pub fn write_filter_csv<W: Write>(samples: &[FilterSample], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["omega_rad_s", "omega_tau", "F"])?;
    for s in samples {
        out.write_record([s.omega.to_string(), s.omega_tau.to_string(), s.f.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
