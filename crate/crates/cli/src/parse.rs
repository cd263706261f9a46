//! Short command-line forms for spectra, grids and enums.

use std::f64::consts::TAU;
use std::io::BufReader;

use ddsim::noise::read_tabulated_csv;
use ddsim::{Band, PulseAxis, SequenceKind, SpectrumModel, Spur};

fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

/// `ohmic:A,cutoff_hz`, `ambient:alpha,ref_hz[,spur_hz,weight]`,
/// `white:level,lo_hz,hi_hz`, `power:exponent,amplitude,ref_hz`,
/// `table:path`, or a JSON model object.
pub fn model(s: &str) -> Result<SpectrumModel, String> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| e.to_string());
    }
    let (name, rest) = s.split_once(':').ok_or("expected <kind>:<params>")?;
    if name == "table" {
        let file = std::fs::File::open(rest).map_err(|e| format!("{rest}: {e}"))?;
        return read_tabulated_csv(BufReader::new(file)).map_err(|e| e.to_string());
    }
    let p = numbers(rest)?;
    let need = |k: usize| if p.len() == k { Ok(()) } else { Err(format!("`{name}` takes {k} numbers, got {}", p.len())) };
    match name {
        "ohmic" => {
            need(2)?;
            Ok(SpectrumModel::ohmic(p[0], TAU * p[1]))
        }
        "ambient" => {
            if p.len() != 2 && p.len() != 4 {
                return Err("`ambient` takes alpha,ref_hz[,spur_hz,weight]".into());
            }
            let spurs = if p.len() == 4 { vec![Spur::at_hz(p[2], p[3])] } else { Vec::new() };
            Ok(SpectrumModel::ambient(p[0], TAU * p[1], spurs))
        }
        "white" => {
            need(3)?;
            Ok(SpectrumModel::white(p[0], Band::new(TAU * p[1], TAU * p[2])))
        }
        "power" => {
            need(3)?;
            Ok(SpectrumModel::power_law(p[0], p[1], TAU * p[2]))
        }
        other => Err(format!("unknown spectrum kind `{other}`")),
    }
}

/// `a,b,c` or `lo:hi:count` (log-spaced, inclusive).
pub fn grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [_] => numbers(s),
        [lo, hi, count] => {
            let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
            let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
            let count: usize = count.trim().parse().map_err(|e| format!("{count}: {e}"))?;
            if !(lo > 0.0 && hi > lo) || count < 2 {
                return Err("need 0 < lo < hi and at least 2 points".into());
            }
            Ok(log_space(lo, hi, count))
        }
        _ => Err("expected `a,b,c` or `lo:hi:count`".into()),
    }
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| if k == count - 1 { hi } else { lo * (step * k as f64).exp() }).collect()
}

pub fn counts(s: &str) -> Result<Vec<usize>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|e| format!("{b}: {e}"))?;
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p}: {e}"))).collect()
}

pub fn kind(s: &str) -> Result<SequenceKind, String> {
    s.parse().map_err(|e: ddsim::Error| e.to_string())
}

pub fn kinds(s: &str) -> Result<Vec<SequenceKind>, String> {
    s.split(',').map(kind).collect()
}

pub fn axis(s: &str) -> Result<PulseAxis, String> {
    match s.to_ascii_lowercase().as_str() {
        "x" => Ok(PulseAxis::X),
        "y" | "y-effective" | "yeffective" => Ok(PulseAxis::YEffective),
        other => Err(format!("unknown pulse axis `{other}` (x or y)")),
    }
}
