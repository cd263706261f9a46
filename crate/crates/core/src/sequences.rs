//! Pulse-sequence layouts: where the π pulses sit inside a sequence of total
//! duration `tau`, how wide they are, and the phase-bookkeeping tails that the
//! Bloch simulator consumes.
//!
//! Times are in seconds. `tau` always includes the pulse durations, and a
//! pulse's fraction is the fractional time of its *center*.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, LayoutViolation, Result};

/// Relative slack used when comparing reconstructed times against each other.
const TIME_SLACK: f64 = 1e-12;

/// Default grid quantum: one period of a 100 kHz bookkeeping detuning.
pub const DEFAULT_GRID_QUANTUM: f64 = 10e-6;
/// Default primary tail (quarter-turn offset at 100 kHz detuning).
pub const DEFAULT_PRIMARY_TAIL: f64 = 12.5e-6;
/// Default final tail.
pub const DEFAULT_FINAL_TAIL: f64 = 17.5e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Cpmg,
    Udd,
    Custom,
}

impl std::fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SequenceKind::Cpmg => "cpmg",
            SequenceKind::Udd => "udd",
            SequenceKind::Custom => "custom",
        })
    }
}

impl std::str::FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpmg" => Ok(SequenceKind::Cpmg),
            "udd" => Ok(SequenceKind::Udd),
            "custom" => Ok(SequenceKind::Custom),
            other => Err(Error::Parse(format!("unknown sequence kind `{other}`"))),
        }
    }
}

/// Rotation axis of a π pulse.
///
/// `YEffective` is realised as a π_X pulse followed by a net π rotation about
/// Z, folded into the following free-precession period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseAxis {
    X,
    #[serde(rename = "Y_effective")]
    YEffective,
}

/// Phase-bookkeeping delays around the pulse train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tails {
    pub primary: f64,
    pub final_: f64,
}

impl Default for Tails {
    fn default() -> Self {
        Tails { primary: DEFAULT_PRIMARY_TAIL, final_: DEFAULT_FINAL_TAIL }
    }
}

/// A recipe for layouts at any total duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFamily {
    pub kind: SequenceKind,
    pub n: usize,
    /// π-pulse duration in seconds.
    pub tau_pi: f64,
    pub axis: PulseAxis,
    /// Explicit center fractions, only for [`SequenceKind::Custom`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    #[serde(default)]
    pub tails: Tails,
    /// When set, layouts built from this family are snapped to the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_quantum: Option<f64>,
}

impl SequenceFamily {
    pub fn cpmg(n: usize, tau_pi: f64) -> Self {
        Self::new(SequenceKind::Cpmg, n, tau_pi)
    }

    pub fn udd(n: usize, tau_pi: f64) -> Self {
        Self::new(SequenceKind::Udd, n, tau_pi)
    }

    pub fn custom(fractions: Vec<f64>, tau_pi: f64) -> Self {
        let mut family = Self::new(SequenceKind::Custom, fractions.len(), tau_pi);
        family.fractions = Some(fractions);
        family
    }

    pub fn new(kind: SequenceKind, n: usize, tau_pi: f64) -> Self {
        SequenceFamily {
            kind,
            n,
            tau_pi,
            axis: PulseAxis::X,
            fractions: None,
            tails: Tails::default(),
            grid_quantum: None,
        }
    }

    pub fn with_axis(mut self, axis: PulseAxis) -> Self {
        self.axis = axis;
        self
    }

    pub fn with_tails(mut self, tails: Tails) -> Self {
        self.tails = tails;
        self
    }

    pub fn with_grid(mut self, quantum: Option<f64>) -> Self {
        self.grid_quantum = quantum;
        self
    }

    /// Center fractions for this family.
    pub fn center_fractions(&self) -> Result<Vec<f64>> {
        match self.kind {
            SequenceKind::Cpmg => Ok(cpmg_fractions(self.n)),
            SequenceKind::Udd => Ok(udd_fractions(self.n)),
            SequenceKind::Custom => {
                let fractions = self
                    .fractions
                    .clone()
                    .ok_or_else(|| Error::invalid("fractions", "custom family needs explicit fractions"))?;
                if fractions.len() != self.n {
                    return Err(LayoutViolation::CountMismatch { n: self.n, fractions: fractions.len() }.into());
                }
                Ok(fractions)
            }
        }
    }

    /// Builds the layout at total duration `tau` and snaps it to the family's
    /// grid when one is configured.
    pub fn layout(&self, tau: f64) -> Result<SequenceLayout> {
        let layout = build_layout(self, tau)?;
        match self.grid_quantum {
            Some(q) => round_to_grid(&layout, q),
            None => Ok(layout),
        }
    }
}

/// Fully resolved pulse placement for one total duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceLayout {
    pub kind: SequenceKind,
    pub n: usize,
    pub fractions: Vec<f64>,
    #[serde(rename = "tau_s")]
    pub tau: f64,
    #[serde(rename = "tau_pi_s")]
    pub tau_pi: f64,
    pub axis_plan: Vec<PulseAxis>,
    #[serde(rename = "primary_tail_s")]
    pub primary_tail: f64,
    #[serde(rename = "final_tail_s")]
    pub final_tail: f64,
    #[serde(rename = "grid_quantum_s", default, skip_serializing_if = "Option::is_none")]
    pub grid_quantum: Option<f64>,
}

/// Centers `(2j - 1) / 2n`: evenly spaced, half-length first and last gaps.
pub fn cpmg_fractions(n: usize) -> Vec<f64> {
    let denom = 2.0 * n as f64;
    (1..=n).map(|j| (2 * j - 1) as f64 / denom).collect()
}

/// Uhrig centers `sin^2(pi j / (2n + 2))`.
pub fn udd_fractions(n: usize) -> Vec<f64> {
    // Same positions as CPMG for n <= 2; avoid the sin^2 rounding there.
    if n <= 2 {
        return cpmg_fractions(n);
    }
    let denom = (2 * n + 2) as f64;
    (1..=n)
        .map(|j| {
            // Mirror the upper half so that d_j + d_{n+1-j} = 1 holds to rounding.
            if 2 * j > n + 1 {
                1.0 - (PI * (n + 1 - j) as f64 / denom).sin().powi(2)
            } else if 2 * j == n + 1 {
                0.5
            } else {
                (PI * j as f64 / denom).sin().powi(2)
            }
        })
        .collect()
}

/// Places the family's pulses in a sequence of total duration `tau` and checks
/// every layout invariant.
pub fn build_layout(family: &SequenceFamily, tau: f64) -> Result<SequenceLayout> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(LayoutViolation::Duration(tau).into());
    }
    if !(family.tau_pi.is_finite() && family.tau_pi >= 0.0) {
        return Err(LayoutViolation::PulseDuration(family.tau_pi).into());
    }
    let pulse_time = family.n as f64 * family.tau_pi;
    if family.n > 0 && pulse_time >= tau {
        return Err(LayoutViolation::TooShort { pulse_time, tau }.into());
    }
    let layout = SequenceLayout {
        kind: family.kind,
        n: family.n,
        fractions: family.center_fractions()?,
        tau,
        tau_pi: family.tau_pi,
        axis_plan: vec![family.axis; family.n],
        primary_tail: family.tails.primary,
        final_tail: family.tails.final_,
        grid_quantum: None,
    };
    layout.validate()?;
    Ok(layout)
}

/// Rounds every free-precession interval to the nearest multiple of `quantum`
/// (halves away from zero). The residual is pushed into the final interval so
/// that `tau` survives whenever the original free time was itself on the grid.
pub fn round_to_grid(layout: &SequenceLayout, quantum: f64) -> Result<SequenceLayout> {
    if !(quantum.is_finite() && quantum > 0.0) {
        return Err(Error::invalid("quantum", format!("must be positive, got {quantum}")));
    }
    let intervals = layout.free_intervals();
    let mut counts: Vec<i64> = intervals.iter().map(|&dt| (dt / quantum).round() as i64).collect();
    for (index, (&count, &interval)) in counts.iter().zip(&intervals).enumerate() {
        if count <= 0 && interval > TIME_SLACK * layout.tau {
            return Err(LayoutViolation::Collapsed { index, interval, quantum }.into());
        }
    }
    let free_total: f64 = intervals.iter().sum();
    let residual = ((free_total / quantum).round() as i64) - counts.iter().sum::<i64>();
    let last = counts.len() - 1;
    if counts[last] + residual > 0 {
        counts[last] += residual;
    }
    if counts.iter().any(|&c| c < 0) {
        let index = counts.iter().position(|&c| c < 0).unwrap_or(0);
        return Err(LayoutViolation::Collapsed { index, interval: intervals[index], quantum }.into());
    }

    let n = layout.n;
    let total_count: i64 = counts.iter().sum();
    let tau = total_count as f64 * quantum + n as f64 * layout.tau_pi;
    let mut running = 0i64;
    let fractions = (0..n)
        .map(|j| {
            running += counts[j];
            let center = running as f64 * quantum + j as f64 * layout.tau_pi + 0.5 * layout.tau_pi;
            center / tau
        })
        .collect();

    let rounded = SequenceLayout { fractions, tau, grid_quantum: Some(quantum), ..layout.clone() };
    rounded.validate()?;
    Ok(rounded)
}

impl SequenceLayout {
    /// Fractional pulse width `tau_pi / tau`.
    pub fn pulse_fraction(&self) -> f64 {
        self.tau_pi / self.tau
    }

    /// Pulse centers in seconds.
    pub fn centers(&self) -> Vec<f64> {
        self.fractions.iter().map(|d| d * self.tau).collect()
    }

    /// The `n + 1` free-precession intervals in seconds, in time order.
    pub fn free_intervals(&self) -> Vec<f64> {
        let half = 0.5 * self.tau_pi;
        let mut edges = Vec::with_capacity(2 * self.n + 2);
        edges.push(0.0);
        for c in self.centers() {
            edges.push(c - half);
            edges.push(c + half);
        }
        edges.push(self.tau);
        edges.chunks(2).map(|w| w[1] - w[0]).collect()
    }

    /// Checks every layout invariant.
    pub fn validate(&self) -> Result<()> {
        let tau = self.tau;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(LayoutViolation::Duration(tau).into());
        }
        if !(self.tau_pi.is_finite() && self.tau_pi >= 0.0) {
            return Err(LayoutViolation::PulseDuration(self.tau_pi).into());
        }
        if self.fractions.len() != self.n {
            return Err(LayoutViolation::CountMismatch { n: self.n, fractions: self.fractions.len() }.into());
        }
        if self.axis_plan.len() != self.n {
            return Err(LayoutViolation::AxisPlan { plan: self.axis_plan.len(), n: self.n }.into());
        }
        let tails_ok = [self.primary_tail, self.final_tail].iter().all(|t| t.is_finite() && *t >= 0.0);
        if !tails_ok {
            return Err(LayoutViolation::Tail.into());
        }
        let pulse_time = self.n as f64 * self.tau_pi;
        if pulse_time > tau * (1.0 + TIME_SLACK) {
            return Err(LayoutViolation::TooShort { pulse_time, tau }.into());
        }
        for (index, &value) in self.fractions.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(LayoutViolation::FractionOutOfRange { index, value }.into());
            }
        }
        for (index, w) in self.fractions.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(LayoutViolation::NotIncreasing { index: index + 1 }.into());
            }
        }
        let slack = TIME_SLACK * tau;
        let half_width = 0.5 * self.tau_pi;
        if let (Some(&first), Some(&last)) = (self.fractions.first(), self.fractions.last()) {
            if first * tau < half_width - slack {
                return Err(LayoutViolation::LeadingEdge { center: first * tau, half_width }.into());
            }
            if (1.0 - last) * tau < half_width - slack {
                return Err(LayoutViolation::TrailingEdge { center: last * tau, half_width, tau }.into());
            }
        }
        for (index, w) in self.fractions.windows(2).enumerate() {
            let gap = (w[1] - w[0]) * tau;
            if gap < self.tau_pi - slack {
                return Err(LayoutViolation::Overlap { index, next: index + 1, gap, tau_pi: self.tau_pi }.into());
            }
        }
        if let Some(quantum) = self.grid_quantum {
            if !(quantum.is_finite() && quantum > 0.0) {
                return Err(Error::invalid("grid_quantum", format!("must be positive, got {quantum}")));
            }
            for (index, interval) in self.free_intervals().into_iter().enumerate() {
                let steps = interval / quantum;
                if (steps - steps.round()).abs() > 1e-6 {
                    return Err(LayoutViolation::OffGrid { index, interval, quantum }.into());
                }
            }
        }
        Ok(())
    }

    /// Time-reversed layout: center fractions `d_j -> 1 - d_{n+1-j}`.
    pub fn time_reversed(&self) -> SequenceLayout {
        let mut reversed = self.clone();
        reversed.fractions = self.fractions.iter().rev().map(|d| 1.0 - d).collect();
        reversed.axis_plan.reverse();
        reversed
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses and validates a layout document.
    pub fn from_json(text: &str) -> Result<SequenceLayout> {
        let layout: SequenceLayout = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_fracs(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert_abs_diff_eq!(a, e, epsilon = tol);
        }
    }

    #[test]
    fn cpmg_examples() {
        assert_eq!(cpmg_fractions(1), vec![0.5]);
        assert_eq!(cpmg_fractions(2), vec![0.25, 0.75]);
        assert_eq!(cpmg_fractions(4), vec![0.125, 0.375, 0.625, 0.875]);
        assert!(cpmg_fractions(0).is_empty());
    }

    #[test]
    fn udd_examples() {
        assert_fracs(&udd_fractions(1), &[0.5], 1e-15);
        assert_fracs(&udd_fractions(2), &[0.25, 0.75], 1e-15);
        assert_fracs(&udd_fractions(3), &[0.14644661, 0.5, 0.85355339], 1e-8);
    }

    #[test]
    fn udd_matches_cpmg_for_small_n() {
        for n in 0..=2 {
            assert_eq!(udd_fractions(n), cpmg_fractions(n), "n = {n}");
        }
    }

    #[test]
    fn udd_is_symmetric() {
        for n in 1..=64 {
            let d = udd_fractions(n);
            for j in 0..n {
                assert!((d[j] + d[n - 1 - j] - 1.0).abs() <= 2.0 * f64::EPSILON, "n = {n}, j = {j}");
            }
        }
    }

    #[test]
    fn build_single_udd_pulse() {
        let layout = build_layout(&SequenceFamily::udd(1, 0.0), 1e-3).unwrap();
        assert_abs_diff_eq!(layout.centers()[0], 0.5e-3, epsilon = 1e-18);
    }

    #[test]
    fn build_rejects_overfull_cpmg() {
        let err = build_layout(&SequenceFamily::cpmg(6, 185e-6), 1e-3).unwrap_err();
        assert!(matches!(err, Error::Layout(LayoutViolation::TooShort { .. })), "{err}");
    }

    #[test]
    fn build_udd3_with_wide_pulses() {
        let layout = build_layout(&SequenceFamily::udd(3, 185e-6), 8e-3).unwrap();
        let expected: Vec<f64> = udd_fractions(3).iter().map(|d| d * 8e-3).collect();
        assert_fracs(&layout.centers(), &expected, 1e-15);
        for w in layout.centers().windows(2) {
            assert!(w[1] - w[0] >= 185e-6);
        }
    }

    #[test]
    fn udd_edge_pulse_can_overlap_start() {
        // First UDD n = 10 center sits at 2% of tau; a wide pulse spills past t = 0.
        let err = build_layout(&SequenceFamily::udd(10, 100e-6), 2e-3).unwrap_err();
        assert!(matches!(err, Error::Layout(LayoutViolation::LeadingEdge { .. })), "{err}");
    }

    #[test]
    fn free_induction_layout() {
        let layout = build_layout(&SequenceFamily::cpmg(0, 185e-6), 1e-3).unwrap();
        assert_eq!(layout.free_intervals(), vec![1e-3]);
    }

    #[test]
    fn grid_fixed_point() {
        let layout = build_layout(&SequenceFamily::cpmg(4, 0.0), 800e-6).unwrap();
        let rounded = round_to_grid(&layout, 10e-6).unwrap();
        assert_fracs(&rounded.fractions, &layout.fractions, 1e-15);
        assert_abs_diff_eq!(rounded.tau, layout.tau, epsilon = 1e-18);
    }

    #[test]
    fn grid_udd3_example() {
        let layout = build_layout(&SequenceFamily::udd(3, 0.0), 1e-3).unwrap();
        let rounded = round_to_grid(&layout, 10e-6).unwrap();
        let intervals = rounded.free_intervals();
        assert_fracs(&intervals, &[150e-6, 350e-6, 350e-6, 150e-6], 1e-15);
        assert_abs_diff_eq!(rounded.tau, 1e-3, epsilon = 1e-15);
    }

    #[test]
    fn grid_residual_goes_to_last_interval() {
        // CPMG n = 6 with 8 ms of free precession: 666.7 / 1333.3 us intervals.
        let tau_pi = 185e-6;
        let layout = build_layout(&SequenceFamily::cpmg(6, tau_pi), 8e-3 + 6.0 * tau_pi).unwrap();
        let rounded = round_to_grid(&layout, 10e-6).unwrap();
        let intervals = rounded.free_intervals();
        assert_abs_diff_eq!(intervals[0], 670e-6, epsilon = 1e-12);
        assert_abs_diff_eq!(intervals[3], 1330e-6, epsilon = 1e-12);
        assert_abs_diff_eq!(intervals[6], 680e-6, epsilon = 1e-12);
        assert_abs_diff_eq!(rounded.tau, layout.tau, epsilon = 1e-15);
    }

    #[test]
    fn grid_collapse_rejected() {
        let layout = build_layout(&SequenceFamily::udd(3, 0.0), 1e-3).unwrap();
        let err = round_to_grid(&layout, 400e-6).unwrap_err();
        assert!(matches!(err, Error::Layout(LayoutViolation::Collapsed { .. })), "{err}");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let family = SequenceFamily::udd(7, 12.345e-6).with_axis(PulseAxis::YEffective);
        let layout = family.layout(3.3e-3).unwrap();
        let text = layout.to_json().unwrap();
        assert!(text.contains("\"tau_s\"") && text.contains("\"Y_effective\""));
        assert_eq!(SequenceLayout::from_json(&text).unwrap(), layout);

        let gridded = round_to_grid(&layout, 10e-6).unwrap();
        let back = SequenceLayout::from_json(&gridded.to_json().unwrap()).unwrap();
        assert_eq!(back, gridded);
    }

    #[test]
    fn json_rejects_invalid_layout() {
        let mut layout = build_layout(&SequenceFamily::cpmg(2, 0.0), 1e-3).unwrap();
        layout.fractions = vec![0.75, 0.25];
        let text = serde_json::to_string(&layout).unwrap();
        assert!(SequenceLayout::from_json(&text).is_err());
    }

    fn family_strategy() -> impl Strategy<Value = (SequenceFamily, f64)> {
        (0usize..16, prop::bool::ANY, 0.0f64..0.05, 1e-4f64..1e-1).prop_map(|(n, udd, width, tau)| {
            let kind = if udd { SequenceKind::Udd } else { SequenceKind::Cpmg };
            // Pulse width as a fraction of the smallest possible gap.
            let tau_pi = width * tau / (n.max(1) as f64 * 10.0);
            (SequenceFamily::new(kind, n, tau_pi), tau)
        })
    }

    proptest! {
        #[test]
        fn built_layouts_validate((family, tau) in family_strategy()) {
            if let Ok(layout) = build_layout(&family, tau) {
                prop_assert!(layout.validate().is_ok());
                let total: f64 = layout.free_intervals().iter().sum::<f64>() + layout.n as f64 * layout.tau_pi;
                prop_assert!((total - tau).abs() <= 1e-12 * tau);
            }
        }

        #[test]
        fn grid_rounding_is_idempotent((family, tau) in family_strategy(), q in 1e-6f64..2e-5) {
            let rounded = build_layout(&family, tau).and_then(|layout| round_to_grid(&layout, q));
            if let Ok(once) = rounded {
                let twice = round_to_grid(&once, q).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
