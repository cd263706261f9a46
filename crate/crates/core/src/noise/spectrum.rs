use std::f64::consts::{PI, TAU};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `[lo, hi]` in rad/s; the spectrum is zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Band { lo, hi }
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.lo && omega <= self.hi
    }
}

/// 1 mHz to 1 MHz, expressed in rad/s.
pub const DEFAULT_BAND: Band = Band { lo: TAU * 1e-3, hi: TAU * 1e6 };

fn default_band() -> Band {
    DEFAULT_BAND
}

fn default_scale() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// A narrow Gaussian line on top of the ambient background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spur {
    /// Line center in rad/s.
    pub center: f64,
    /// Integrated power as a fraction of the background power over the
    /// reference band.
    pub weight: f64,
    /// Full width at half maximum in rad/s.
    pub fwhm: f64,
}

impl Spur {
    /// Line at `freq_hz` with the default 1 Hz full width.
    pub fn at_hz(freq_hz: f64, weight: f64) -> Self {
        Spur { center: TAU * freq_hz, weight, fwhm: TAU * 1.0 }
    }

    fn sigma(&self) -> f64 {
        self.fwhm / (8.0 * std::f64::consts::LN_2).sqrt()
    }

    /// Unit-area Gaussian profile.
    fn profile(&self, omega: f64) -> f64 {
        let sigma = self.sigma();
        let z = (omega - self.center) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpectrumShape {
    /// `A (ω / ω_ref)^p`.
    PowerLaw { exponent: f64, amplitude: f64, reference: f64 },
    /// `A ω` up to `cutoff`, zero above.
    OhmicHardCutoff { slope: f64, cutoff: f64 },
    /// `α [(ω_ref / ω)^4 + spurs]`, each spur carrying `weight` times the
    /// `(ω_ref/ω)^4` power integrated over `spur_reference` (the model band
    /// when unset).
    Ambient {
        amplitude: f64,
        reference: f64,
        #[serde(default)]
        spurs: Vec<Spur>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spur_reference: Option<Band>,
        #[serde(default = "default_true")]
        include_background: bool,
    },
    /// Sorted `(ω, S)` samples, interpolated linearly in log-log space and zero
    /// outside the table.
    Tabulated { omega: Vec<f64>, psd: Vec<f64> },
}

/// A noise spectrum with its support band and the amplitude knob `V_N`.
/// The effective spectrum is `V_N² · shape(ω)` inside the band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    pub shape: SpectrumShape,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_band")]
    pub band: Band,
}

impl SpectrumModel {
    pub fn new(shape: SpectrumShape) -> Self {
        SpectrumModel { shape, scale: 1.0, band: DEFAULT_BAND }
    }

    pub fn power_law(exponent: f64, amplitude: f64, reference: f64) -> Self {
        Self::new(SpectrumShape::PowerLaw { exponent, amplitude, reference })
    }

    pub fn ohmic(slope: f64, cutoff: f64) -> Self {
        Self::new(SpectrumShape::OhmicHardCutoff { slope, cutoff })
    }

    /// White spectrum `level` over `band`.
    pub fn white(level: f64, band: Band) -> Self {
        Self::power_law(0.0, level, 1.0).with_band(band)
    }

    pub fn ambient(amplitude: f64, reference: f64, spurs: Vec<Spur>) -> Self {
        Self::new(SpectrumShape::Ambient {
            amplitude,
            reference,
            spurs,
            spur_reference: None,
            include_background: true,
        })
    }

    pub fn tabulated(omega: Vec<f64>, psd: Vec<f64>) -> Result<Self> {
        if omega.len() != psd.len() || omega.len() < 2 {
            return Err(Error::invalid("table", "need at least two (omega, psd) rows of equal length"));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) || omega[0] <= 0.0 {
            return Err(Error::invalid("table", "frequencies must be positive and strictly increasing"));
        }
        if psd.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("table", "psd values must be finite and >= 0"));
        }
        let band = Band::new(omega[0], omega[omega.len() - 1]);
        Ok(SpectrumModel { shape: SpectrumShape::Tabulated { omega, psd }, scale: 1.0, band })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_band(mut self, band: Band) -> Self {
        self.band = band;
        self
    }

    /// `S(ω)`; rejects `ω <= 0`.
    pub fn psd(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::FrequencyDomain { omega });
        }
        Ok(self.psd_unchecked(omega))
    }

    /// `S(ω)` for `ω > 0`, without the domain check.
    pub(crate) fn psd_unchecked(&self, omega: f64) -> f64 {
        if !self.band.contains(omega) || self.scale == 0.0 {
            return 0.0;
        }
        self.scale * self.scale * self.shape_value(omega)
    }

    fn shape_value(&self, omega: f64) -> f64 {
        match &self.shape {
            SpectrumShape::PowerLaw { exponent, amplitude, reference } => {
                amplitude * (omega / reference).powf(*exponent)
            }
            SpectrumShape::OhmicHardCutoff { slope, cutoff } => {
                if omega <= *cutoff {
                    slope * omega
                } else {
                    0.0
                }
            }
            SpectrumShape::Ambient { amplitude, reference, spurs, include_background, .. } => {
                let background = if *include_background { (reference / omega).powi(4) } else { 0.0 };
                let base_power = self.background_power();
                let lines: f64 = spurs.iter().map(|s| s.weight * base_power * s.profile(omega)).sum();
                amplitude * (background + lines)
            }
            SpectrumShape::Tabulated { omega: nodes, psd } => interpolate_log_log(nodes, psd, omega),
        }
    }

    /// `∫ (ω_ref/ω)^4 dω` over the spur reference band (ambient only).
    pub fn background_power(&self) -> f64 {
        match &self.shape {
            SpectrumShape::Ambient { reference, spur_reference, .. } => {
                let band = spur_reference.unwrap_or(self.band);
                reference.powi(4) * (band.lo.powi(-3) - band.hi.powi(-3)) / 3.0
            }
            _ => 0.0,
        }
    }

    /// Upper edge of the nonzero support.
    pub fn support(&self) -> Band {
        let hi = match &self.shape {
            SpectrumShape::OhmicHardCutoff { cutoff, .. } => self.band.hi.min(*cutoff),
            SpectrumShape::Tabulated { omega, .. } => self.band.hi.min(omega[omega.len() - 1]),
            _ => self.band.hi,
        };
        let lo = match &self.shape {
            SpectrumShape::Tabulated { omega, .. } => self.band.lo.max(omega[0]),
            _ => self.band.lo,
        };
        Band::new(lo, hi)
    }

    /// Frequencies where the spectrum has kinks, jumps or narrow features.
    pub fn features(&self) -> Vec<f64> {
        let support = self.support();
        let mut points = vec![support.lo, support.hi];
        match &self.shape {
            SpectrumShape::OhmicHardCutoff { cutoff, .. } => points.push(*cutoff),
            SpectrumShape::Ambient { spurs, .. } => {
                for s in spurs {
                    let sigma = s.sigma();
                    points.extend((-8..=8).map(|k| s.center + k as f64 * sigma));
                }
            }
            _ => {}
        }
        points.retain(|w| w.is_finite() && *w >= support.lo && *w <= support.hi);
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    /// Background-only copy of an ambient model (other shapes unchanged).
    pub fn without_spurs(&self) -> SpectrumModel {
        let mut out = self.clone();
        if let SpectrumShape::Ambient { spurs, spur_reference, .. } = &mut out.shape {
            *spur_reference = Some(self.spur_band());
            spurs.clear();
        }
        out
    }

    /// Spur-only copy of an ambient model, each spur at unit weight.
    pub fn spurs_only(&self) -> SpectrumModel {
        let mut out = self.clone();
        if let SpectrumShape::Ambient { spurs, include_background, spur_reference, .. } = &mut out.shape {
            *spur_reference = Some(self.spur_band());
            *include_background = false;
            for s in spurs.iter_mut() {
                s.weight = 1.0;
            }
        }
        out
    }

    fn spur_band(&self) -> Band {
        match &self.shape {
            SpectrumShape::Ambient { spur_reference, .. } => spur_reference.unwrap_or(self.band),
            _ => self.band,
        }
    }

    /// Low-frequency power-law exponent of `S` near the lower support edge.
    pub fn infrared_exponent(&self) -> f64 {
        match &self.shape {
            SpectrumShape::PowerLaw { exponent, .. } => *exponent,
            SpectrumShape::OhmicHardCutoff { .. } => 1.0,
            SpectrumShape::Ambient { include_background: true, .. } => -4.0,
            SpectrumShape::Ambient { .. } => 0.0,
            SpectrumShape::Tabulated { omega, psd } => {
                if psd[0] > 0.0 && psd[1] > 0.0 {
                    (psd[1] / psd[0]).ln() / (omega[1] / omega[0]).ln()
                } else {
                    0.0
                }
            }
        }
    }
}

/// `S(ω)` for a model; `ω <= 0` is a domain error.
pub fn psd(model: &SpectrumModel, omega: f64) -> Result<f64> {
    model.psd(omega)
}

fn interpolate_log_log(nodes: &[f64], values: &[f64], omega: f64) -> f64 {
    let last = nodes.len() - 1;
    if omega < nodes[0] || omega > nodes[last] {
        return 0.0;
    }
    let k = match nodes.binary_search_by(|w| w.total_cmp(&omega)) {
        Ok(k) => return values[k],
        Err(k) => k - 1,
    };
    let (w0, w1, s0, s1) = (nodes[k], nodes[k + 1], values[k], values[k + 1]);
    if s0 > 0.0 && s1 > 0.0 {
        let t = (omega / w0).ln() / (w1 / w0).ln();
        (s0.ln() + t * (s1 / s0).ln()).exp()
    } else {
        s0 + (s1 - s0) * (omega - w0) / (w1 - w0)
    }
}

/// Header comment every tabulated-spectrum file must carry.
pub const TABULATED_CONVENTION: &str = "# convention=one-sided-angular";

/// Reads a `freq_hz,psd` table preceded by the convention comment line.
pub fn read_tabulated_csv<R: BufRead>(reader: R) -> Result<SpectrumModel> {
    let mut lines = reader.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim() != TABULATED_CONVENTION {
        return Err(Error::Parse(format!(
            "tabulated spectrum must start with `{TABULATED_CONVENTION}`, found `{}`",
            first.trim()
        )));
    }
    let rest: String = lines.collect::<std::io::Result<Vec<_>>>()?.join("\n");
    let mut table = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(rest.as_bytes());
    let headers = table.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["freq_hz", "psd"] {
        return Err(Error::Parse(format!("expected columns freq_hz,psd, found {headers:?}")));
    }
    let (mut omega, mut values) = (Vec::new(), Vec::new());
    for (row, record) in table.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))
        };
        omega.push(TAU * parse(0)?);
        values.push(parse(1)?);
    }
    SpectrumModel::tabulated(omega, values)
}

/// Writes a tabulated spectrum in the format [`read_tabulated_csv`] accepts.
pub fn write_tabulated_csv<W: Write>(omega: &[f64], psd: &[f64], mut writer: W) -> Result<()> {
    writeln!(writer, "{TABULATED_CONVENTION}")?;
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["freq_hz", "psd"])?;
    for (w, s) in omega.iter().zip(psd) {
        out.write_record([(w / TAU).to_string(), s.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ohmic_is_zero_above_cutoff() {
        let model = SpectrumModel::ohmic(2.0, TAU * 500.0);
        assert_eq!(model.psd(TAU * 600.0).unwrap(), 0.0);
        assert_relative_eq!(model.psd(TAU * 400.0).unwrap(), 2.0 * TAU * 400.0);
        assert_relative_eq!(model.psd(TAU * 500.0).unwrap(), 2.0 * TAU * 500.0);
    }

    #[test]
    fn power_law_exponent() {
        let model = SpectrumModel::power_law(-4.0, 3.0, 10.0);
        assert_relative_eq!(model.psd(20.0).unwrap(), 3.0 / 16.0, max_relative = 1e-15);
    }

    #[test]
    fn nonpositive_frequency_rejected() {
        let model = SpectrumModel::power_law(-4.0, 3.0, 10.0);
        assert!(matches!(model.psd(0.0), Err(Error::FrequencyDomain { .. })));
        assert!(model.psd(-1.0).is_err());
    }

    #[test]
    fn zero_outside_band() {
        let model = SpectrumModel::white(1.0, Band::new(1.0, 10.0));
        assert_eq!(model.psd(0.5).unwrap(), 0.0);
        assert_eq!(model.psd(11.0).unwrap(), 0.0);
        assert_eq!(model.psd(5.0).unwrap(), 1.0);
    }

    #[test]
    fn scale_enters_quadratically() {
        let base = SpectrumModel::ambient(1.0, TAU, vec![Spur::at_hz(153.0, 0.15)]);
        let scaled = base.clone().with_scale(0.7);
        for w in [0.1, 10.0, TAU * 153.0, 1e4] {
            assert_relative_eq!(scaled.psd(w).unwrap(), 0.49 * base.psd(w).unwrap(), max_relative = 1e-15);
        }
    }

    /// Composite Simpson on a uniform grid.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = f(a) + f(b);
        for k in 1..panels {
            acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn spur_weight_is_fraction_of_background_power() {
        let band = Band::new(TAU * 1.0, TAU * 1e3);
        let model = SpectrumModel::ambient(1.0, TAU, vec![Spur::at_hz(153.0, 0.15)]).with_band(band);
        let bg = model.without_spurs();
        let center = TAU * 153.0;
        let line = |w: f64| model.psd(w).unwrap() - bg.psd(w).unwrap();
        let spur_power = simpson(line, center - 60.0, center + 60.0, 20_000);
        // Background power by quadrature in log space.
        let (la, lb) = ((band.lo * (1.0 + 1e-12)).ln(), (band.hi * (1.0 - 1e-12)).ln());
        let bg_power = simpson(|u| bg.psd(u.exp()).unwrap() * u.exp(), la, lb, 200_000);
        assert_relative_eq!(spur_power / bg_power, 0.15, max_relative = 1e-6);
    }

    #[test]
    fn tabulated_interpolates_log_log() {
        let model = SpectrumModel::tabulated(vec![1.0, 100.0], vec![1.0, 1e-4]).unwrap();
        assert_relative_eq!(model.psd(10.0).unwrap(), 1e-2, max_relative = 1e-12);
        assert_eq!(model.psd(200.0).unwrap(), 0.0);
        assert_eq!(model.psd(0.5).unwrap(), 0.0);
        assert_relative_eq!(model.infrared_exponent(), -2.0, max_relative = 1e-12);
    }

    #[test]
    fn tabulated_csv_round_trip() {
        let omega = vec![TAU * 0.5, TAU * 2.0, TAU * 30.0];
        let values = vec![3.0, 0.25, 1e-7];
        let mut buf = Vec::new();
        write_tabulated_csv(&omega, &values, &mut buf).unwrap();
        let model = read_tabulated_csv(buf.as_slice()).unwrap();
        match model.shape {
            SpectrumShape::Tabulated { omega: w, psd } => {
                for (a, b) in w.iter().zip(&omega) {
                    assert_relative_eq!(a, b, max_relative = 1e-15);
                }
                assert_eq!(psd, values);
            }
            _ => panic!("expected tabulated"),
        }
    }

    #[test]
    fn tabulated_csv_requires_convention_line() {
        let text = "freq_hz,psd\n1,1\n2,1\n";
        assert!(matches!(read_tabulated_csv(text.as_bytes()), Err(Error::Parse(_))));
        let wrong = "# convention=two-sided-hz\nfreq_hz,psd\n1,1\n2,1\n";
        assert!(read_tabulated_csv(wrong.as_bytes()).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let model = SpectrumModel::ambient(2.3, TAU, vec![Spur::at_hz(153.0, 0.15)]).with_scale(0.7);
        let text = serde_json::to_string(&model).unwrap();
        assert!(text.contains("\"type\":\"ambient\""));
        let back: SpectrumModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
    }
}
