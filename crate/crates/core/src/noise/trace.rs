use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::spectrum::SpectrumModel;
use super::POWER_TO_VARIANCE;
use crate::error::{Error, Result};

/// A sampled realization of `β(t)` in rad/s on the grid `t_i = i·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
    /// Realization index within the seed's stream family.
    #[serde(default)]
    pub stream: u64,
    pub model: Option<SpectrumModel>,
    /// Running trapezoid integral, `cumulative[i] = ∫₀^{t_i} β`.
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl NoiseTrace {
    /// Wraps raw samples (e.g. a deterministic test signal).
    pub fn from_samples(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(Error::invalid("samples", "a trace needs at least two samples"));
        }
        Ok(Self::assemble(dt, samples, 0, 0, None))
    }

    /// Samples `f(t_i)` on `[0, duration]`.
    pub fn from_fn(dt: f64, duration: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let count = (duration / dt).ceil() as usize + 1;
        Self::from_samples(dt, (0..count).map(|i| f(i as f64 * dt)).collect())
    }

    fn assemble(dt: f64, samples: Vec<f64>, seed: u64, stream: u64, model: Option<SpectrumModel>) -> Self {
        let mut cumulative = Vec::with_capacity(samples.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in samples.windows(2) {
            acc += 0.5 * dt * (w[0] + w[1]);
            cumulative.push(acc);
        }
        NoiseTrace { dt, samples, seed, stream, model, cumulative }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of the last sample.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.samples.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (self.samples.len() - 1) as f64
    }

    fn ensure_cumulative(&mut self) {
        if self.cumulative.len() != self.samples.len() {
            *self = Self::assemble(self.dt, std::mem::take(&mut self.samples), self.seed, self.stream, self.model.take());
        }
    }

    /// `∫₀^t β` of the piecewise-linear interpolant.
    fn primitive(&self, t: f64) -> f64 {
        let last = self.samples.len() - 1;
        let pos = (t / self.dt).clamp(0.0, last as f64);
        let i = (pos.floor() as usize).min(last.saturating_sub(1));
        let u = pos - i as f64;
        let (b0, b1) = (self.samples[i], self.samples[i + 1]);
        self.cumulative[i] + u * self.dt * (b0 + 0.5 * (b1 - b0) * u)
    }

    /// `∫_a^b β(t) dt` with linear interpolation between samples. Exact for
    /// piecewise-linear signals.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        debug_assert_eq!(self.cumulative.len(), self.samples.len());
        self.primitive(b) - self.primitive(a)
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: f64) -> NoiseTrace {
        let samples = self.samples.iter().map(|b| b * factor).collect();
        let mut out = Self::assemble(self.dt, samples, self.seed, self.stream, self.model.clone());
        if let Some(m) = out.model.as_mut() {
            m.scale *= factor;
        }
        out
    }
}

impl NoiseTrace {
    /// Parses a trace written with `serde_json` and rebuilds the running integral.
    pub fn from_json(text: &str) -> Result<NoiseTrace> {
        let mut trace: NoiseTrace = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if trace.samples.len() < 2 || !(trace.dt > 0.0) {
            return Err(Error::Parse("trace needs dt > 0 and two samples".into()));
        }
        trace.ensure_cumulative();
        Ok(trace)
    }
}

/// Reusable random-phase synthesizer for one model and sampling grid.
///
/// Bin `k` (`ω_k = 2πk / (N dt)`, `0 < k < N/2`) gets the cosine amplitude
/// `sqrt(2 · (4/π) · S(ω_k) · Δω)` and an independent uniform phase; DC and
/// Nyquist are zero. Realization `stream` of `seed` is a pure function of
/// `(seed, stream, N, dt)` and the model.
pub struct TraceSynthesizer {
    model: SpectrumModel,
    dt: f64,
    /// Returned length (samples covering `[0, duration]`).
    len: usize,
    /// Transform length, a power of two `>= len`.
    fft_len: usize,
    amplitudes: Vec<f64>,
    plan: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TraceSynthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceSynthesizer")
            .field("dt", &self.dt)
            .field("len", &self.len)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl TraceSynthesizer {
    pub fn new(model: &SpectrumModel, duration: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(duration.is_finite() && duration >= 2.0 * dt) {
            return Err(Error::invalid("duration", format!("must be at least 2·dt, got {duration}")));
        }
        let nyquist = PI / dt;
        let support = model.support();
        if model.scale != 0.0 && support.lo >= nyquist {
            return Err(Error::AboveNyquist { band_lo: support.lo, band_hi: support.hi, nyquist });
        }
        let len = (duration / dt - 1e-9).ceil() as usize + 1;
        let fft_len = len.next_power_of_two();
        let d_omega = TAU / (fft_len as f64 * dt);
        let amplitudes = (1..fft_len / 2)
            .map(|k| {
                let s = model.psd_unchecked(k as f64 * d_omega);
                (2.0 * POWER_TO_VARIANCE * s * d_omega).sqrt()
            })
            .collect();
        let plan = FftPlanner::new().plan_fft_inverse(fft_len);
        Ok(TraceSynthesizer { model: model.clone(), dt, len, fft_len, amplitudes, plan })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn model(&self) -> &SpectrumModel {
        &self.model
    }

    /// Bin spacing `2π / (N dt)` in rad/s.
    pub fn bin_spacing(&self) -> f64 {
        TAU / (self.fft_len as f64 * self.dt)
    }

    /// Realization number `stream` for `seed`.
    pub fn trace(&self, seed: u64, stream: u64) -> NoiseTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (k, &a) in self.amplitudes.iter().enumerate() {
            let phase = TAU * rng.random::<f64>();
            let bin = Complex64::from_polar(0.5 * a, phase);
            spectrum[k + 1] = bin;
            spectrum[self.fft_len - k - 1] = bin.conj();
        }
        self.plan.process(&mut spectrum);
        let samples = spectrum.iter().take(self.len).map(|c| c.re).collect();
        NoiseTrace::assemble(self.dt, samples, seed, stream, Some(self.model.clone()))
    }
}

/// One realization of `model` on `[0, duration]` at spacing `dt`.
pub fn synthesize_trace(model: &SpectrumModel, duration: f64, dt: f64, seed: u64) -> Result<NoiseTrace> {
    Ok(TraceSynthesizer::new(model, duration, dt)?.trace(seed, 0))
}

/// Writes `t_s,beta_rad_s` rows.
pub fn write_trace_csv<W: Write>(trace: &NoiseTrace, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["t_s", "beta_rad_s"])?;
    for (i, b) in trace.samples.iter().enumerate() {
        out.write_record([(i as f64 * trace.dt).to_string(), b.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
