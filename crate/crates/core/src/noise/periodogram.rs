use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::spectrum::SpectrumModel;
use super::trace::NoiseTrace;
use super::POWER_TO_VARIANCE;
use crate::error::{Error, Result};

/// Raw periodogram bins `(ω_k, Ŝ_k)` for `k = 1 .. M/2 - 1`, rectangular window,
/// in the same one-sided angular convention as [`SpectrumModel`].
///
/// `Ŝ_k = |X_k|² dt / (π · (4/π) · M)`, which inverts the synthesizer exactly
/// for a full-length power-of-two trace.
pub fn periodogram_bins(trace: &NoiseTrace) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = trace.len();
    if m < 4 {
        return Err(Error::invalid("trace", "periodogram needs at least four samples"));
    }
    let mut buf: Vec<Complex64> = trace.samples.iter().map(|&b| Complex64::new(b, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let norm = trace.dt / (PI * POWER_TO_VARIANCE * m as f64);
    let d_omega = TAU / (m as f64 * trace.dt);
    let (omega, psd) = (1..m.div_ceil(2))
        .filter(|&k| 2 * k != m)
        .map(|k| (k as f64 * d_omega, buf[k].norm_sqr() * norm))
        .unzip();
    Ok((omega, psd))
}

/// Periodogram of one trace as a tabulated spectrum.
pub fn periodogram(trace: &NoiseTrace) -> Result<SpectrumModel> {
    let (omega, psd) = periodogram_bins(trace)?;
    SpectrumModel::tabulated(omega, psd)
}

/// Bin-wise mean of the periodograms of equally sampled traces.
pub fn mean_periodogram(traces: &[NoiseTrace]) -> Result<SpectrumModel> {
    let first = traces.first().ok_or_else(|| Error::invalid("traces", "need at least one trace"))?;
    let (omega, mut acc) = periodogram_bins(first)?;
    for trace in &traces[1..] {
        if trace.len() != first.len() || trace.dt != first.dt {
            return Err(Error::TraceMismatch("traces must share length and dt".into()));
        }
        let (_, psd) = periodogram_bins(trace)?;
        acc.iter_mut().zip(psd).for_each(|(a, s)| *a += s);
    }
    let count = traces.len() as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    SpectrumModel::tabulated(omega, acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{Band, TraceSynthesizer};
    use approx::assert_relative_eq;

    #[test]
    fn single_tone_lands_in_its_bin() {
        // β = c cos(ω_k t) over an integer number of periods.
        let (m, dt) = (1024usize, 1e-4);
        let k = 37;
        let w = TAU * k as f64 / (m as f64 * dt);
        let c = 2.5;
        let samples = (0..m).map(|i| c * (w * i as f64 * dt).cos()).collect();
        let trace = NoiseTrace::from_samples(dt, samples).unwrap();
        let (omega, psd) = periodogram_bins(&trace).unwrap();
        assert_eq!(omega.len(), m / 2 - 1);
        // Power c²/2 = (4/π) Ŝ Δω.
        let d_omega = omega[0];
        assert_relative_eq!(POWER_TO_VARIANCE * psd[k - 1] * d_omega, c * c / 2.0, max_relative = 1e-10);
        let others: f64 = psd.iter().enumerate().filter(|(i, _)| *i != k - 1).map(|(_, s)| s).sum();
        assert!(others < 1e-20 * psd[k - 1].max(1.0));
    }

    #[test]
    fn inverts_full_length_synthesis() {
        let model = SpectrumModel::power_law(-1.0, 3.0, TAU * 100.0).with_band(Band::new(TAU * 5.0, TAU * 2e3));
        // 1024 samples exactly: duration = 1023 dt.
        let dt = 1e-4;
        let synth = TraceSynthesizer::new(&model, 1023.0 * dt, dt).unwrap();
        assert_eq!(synth.len(), synth.fft_len());
        let est = periodogram(&synth.trace(4, 0)).unwrap();
        let (omega, psd) = periodogram_bins(&synth.trace(4, 0)).unwrap();
        let peak = psd.iter().cloned().fold(0.0, f64::max);
        for (w, s) in omega.iter().zip(&psd) {
            let truth = model.psd(*w).unwrap();
            assert!((s - truth).abs() <= 1e-9 * truth + 1e-12 * peak, "ω={w}: {s} vs {truth}");
        }
        assert!(est.psd(omega[10]).is_ok());
    }

    #[test]
    fn mean_rejects_mismatched_traces() {
        let a = NoiseTrace::from_samples(1e-3, vec![0.0; 16]).unwrap();
        let b = NoiseTrace::from_samples(1e-3, vec![0.0; 32]).unwrap();
        assert!(matches!(mean_periodogram(&[a, b]), Err(Error::TraceMismatch(_))));
    }
}
