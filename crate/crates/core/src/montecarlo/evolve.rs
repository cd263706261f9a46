use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::bloch::QubitState;
use super::ensemble::check_coverage;
use crate::error::{Error, Result};
use crate::filter::toggle_function;
use crate::noise::NoiseTrace;
use crate::sequences::{PulseAxis, SequenceLayout};

/// Deliberate interpulse detuning used by the default tails, in rad/s.
pub const DEFAULT_INTERPULSE_DETUNING: f64 = TAU * 100e3;

/// How the rotation during the final tail is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalTailMode {
    /// Whatever Z rotation takes the error-free, noise-free run to the state
    /// the closing π/2 maps onto `|↓⟩`.
    #[default]
    IdealClosure,
    /// `δ_L` times the layout's final tail, taken literally.
    Literal,
}

/// Systematic control errors and phase bookkeeping for [`evolve_sequence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlErrorModel {
    /// `ε`: every π pulse rotates by `π (1 + ε)`.
    pub pulse_length_scale: f64,
    /// `Δ` in rad/s, present during pulses and free precession.
    pub static_detuning: f64,
    /// `δ_L` in rad/s, applied during free precession only.
    pub interpulse_detuning: f64,
    /// Z rotation after the opening π/2. Defaults to `δ_L` times the primary tail.
    pub initial_phase: Option<f64>,
    pub final_tail: FinalTailMode,
    /// Let the noise act during pulses as an extra detuning equal to its mean
    /// over the pulse window.
    pub noise_during_pulses: bool,
}

impl Default for ControlErrorModel {
    fn default() -> Self {
        ControlErrorModel {
            pulse_length_scale: 0.0,
            static_detuning: 0.0,
            interpulse_detuning: DEFAULT_INTERPULSE_DETUNING,
            initial_phase: None,
            final_tail: FinalTailMode::IdealClosure,
            noise_during_pulses: false,
        }
    }
}

impl ControlErrorModel {
    pub fn with_pulse_length_scale(mut self, eps: f64) -> Self {
        self.pulse_length_scale = eps;
        self
    }

    pub fn with_static_detuning(mut self, delta: f64) -> Self {
        self.static_detuning = delta;
        self
    }

    pub fn with_initial_phase(mut self, theta0: f64) -> Self {
        self.initial_phase = Some(theta0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.pulse_length_scale, self.static_detuning, self.interpulse_detuning, self.initial_phase.unwrap_or(0.0)]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("errors", "all control-error parameters must be finite"));
        }
        if self.pulse_length_scale <= -1.0 {
            return Err(Error::invalid("pulse_length_scale", "must be > -1"));
        }
        Ok(())
    }

    fn ideal(&self) -> Self {
        ControlErrorModel { pulse_length_scale: 0.0, static_detuning: 0.0, noise_during_pulses: false, ..*self }
    }
}

/// States recorded along one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    /// After the last free window, before the final tail.
    pub before_tail: QubitState,
    /// The same point of the error-free, noise-free run.
    pub ideal_before_tail: QubitState,
    pub final_state: QubitState,
}

impl Evolution {
    /// Azimuth of the actual state relative to the ideal one, in `(-π, π]`.
    pub fn phase_error(&self) -> f64 {
        let d = self.before_tail.azimuth() - self.ideal_before_tail.azimuth();
        (d + PI).rem_euclid(TAU) - PI
    }
}

fn run(layout: &SequenceLayout, trace: Option<&NoiseTrace>, errors: &ControlErrorModel) -> QubitState {
    let delta = errors.static_detuning;
    let free_rate = errors.interpulse_detuning + delta;
    let theta0 = errors.initial_phase.unwrap_or(errors.interpulse_detuning * layout.primary_tail);
    let mut state = QubitState::UP.rotate_x(FRAC_PI_2).rotate_z(theta0 + delta * layout.primary_tail);
    let noise = |a: f64, b: f64| trace.map_or(0.0, |t| t.integrate(a, b));
    let half = 0.5 * layout.tau_pi;
    let rabi = if layout.tau_pi > 0.0 { PI / layout.tau_pi } else { 0.0 };
    let mut cursor = 0.0;
    let mut carried = 0.0;
    for (center, axis) in layout.centers().into_iter().zip(&layout.axis_plan) {
        let (lead, trail) = (center - half, center + half);
        state = state.rotate_z(free_rate * (lead - cursor) + noise(cursor, lead) + carried);
        if layout.tau_pi == 0.0 {
            state = state.rotate_x(PI * (1.0 + errors.pulse_length_scale));
        } else {
            let offset = if errors.noise_during_pulses { noise(lead, trail) / layout.tau_pi } else { 0.0 };
            let dz = delta + offset;
            let rate = rabi.hypot(dz);
            let angle = rate * layout.tau_pi * (1.0 + errors.pulse_length_scale);
            state = state.rotate([rabi / rate, 0.0, dz / rate], angle);
        }
        carried = match axis {
            PulseAxis::X => 0.0,
            PulseAxis::YEffective => PI,
        };
        cursor = trail;
    }
    state.rotate_z(free_rate * (layout.tau - cursor) + noise(cursor, layout.tau) + carried)
}

/// Full Bloch-vector evolution of one run: `π/2_X`, primary tail, the
/// pulse train with noise gated to the free windows, final tail, closing
/// `π/2_X`. Without noise or errors the run ends in `|↓⟩`.
pub fn evolve_sequence(layout: &SequenceLayout, trace: Option<&NoiseTrace>, errors: &ControlErrorModel) -> Result<Evolution> {
    errors.validate()?;
    if let Some(t) = trace {
        check_coverage(&toggle_function(layout), t)?;
    }
    let before_tail = run(layout, trace, errors);
    let ideal_before_tail = run(layout, None, &errors.ideal());
    let tail = match errors.final_tail {
        FinalTailMode::IdealClosure => -FRAC_PI_2 - ideal_before_tail.azimuth(),
        FinalTailMode::Literal => errors.interpulse_detuning * layout.final_tail,
    };
    let final_state = before_tail
        .rotate_z(tail + errors.static_detuning * layout.final_tail)
        .rotate_x(FRAC_PI_2);
    Ok(Evolution { before_tail, ideal_before_tail, final_state })
}
