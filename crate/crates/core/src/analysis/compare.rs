use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{chi, coherence_curve};
use crate::error::{Error, Result};
use crate::noise::SpectrumModel;
use crate::quadrature::QuadratureConfig;
use crate::sequences::{SequenceFamily, SequenceKind};

const SCAN_POINTS: usize = 200;
const BISECTIONS: usize = 60;

/// Smallest `τ` in `[lo, hi]` at which `χ` reaches `target`, located by a
/// log-spaced scan followed by bisection in `log τ`. `None` if `χ` stays
/// below the target on the whole bracket or already exceeds it at `lo`.
pub fn tau_at_chi(
    family: &SequenceFamily,
    model: &SpectrumModel,
    target: f64,
    bracket: (f64, f64),
    config: &QuadratureConfig,
) -> Result<Option<f64>> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid("bracket", "need 0 < lo < hi < inf"));
    }
    if !(target > 0.0) {
        return Err(Error::invalid("target", "must be positive"));
    }
    let chi_at = |tau: f64| -> Result<f64> {
        let layout = family.layout(tau).map_err(|e| e.at_tau(tau))?;
        Ok(chi(&layout, model, config).map_err(|e| e.at_tau(tau))?.chi)
    };
    let ratio = (hi / lo).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let mut below = lo;
    if chi_at(lo)? >= target {
        return Ok(None);
    }
    let mut above = None;
    for k in 1..SCAN_POINTS {
        let tau = if k == SCAN_POINTS - 1 { hi } else { lo * ratio.powi(k as i32) };
        if chi_at(tau)? >= target {
            above = Some(tau);
            break;
        }
        below = tau;
    }
    let Some(mut above) = above else { return Ok(None) };
    for _ in 0..BISECTIONS {
        let mid = (below * above).sqrt();
        if chi_at(mid)? >= target {
            above = mid;
        } else {
            below = mid;
        }
    }
    Ok(Some((below * above).sqrt()))
}

/// First `τ` with `W(τ) = 1/e`.
pub fn coherence_time(
    family: &SequenceFamily,
    model: &SpectrumModel,
    bracket: (f64, f64),
    config: &QuadratureConfig,
) -> Result<Option<f64>> {
    tau_at_chi(family, model, 1.0, bracket, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub tau: f64,
    pub n: usize,
    pub kind: SequenceKind,
    pub chi: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub error_probability: f64,
}

/// Where the error-probability ordering of two families flips for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub n: usize,
    pub first: SequenceKind,
    pub second: SequenceKind,
    /// Linearly interpolated crossing times; empty means none in the grid.
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub taus: Vec<f64>,
    pub ns: Vec<usize>,
    pub kinds: Vec<SequenceKind>,
    pub rows: Vec<ComparisonRow>,
    pub crossovers: Vec<Crossover>,
}

impl ComparisonReport {
    /// Error probabilities of one family and `n`, in grid order.
    pub fn series(&self, kind: SequenceKind, n: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.kind == kind && r.n == n).map(|r| r.error_probability).collect()
    }

    pub fn crossover(&self, n: usize, first: SequenceKind, second: SequenceKind) -> Option<&Crossover> {
        self.crossovers.iter().find(|c| c.n == n && c.first == first && c.second == second)
    }

    /// `tau_s,n,sequence,chi,W,error_prob`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["tau_s", "n", "sequence", "chi", "W", "error_prob"])?;
        for r in &self.rows {
            out.write_record([
                r.tau.to_string(),
                r.n.to_string(),
                r.kind.to_string(),
                r.chi.to_string(),
                r.w.to_string(),
                r.error_probability.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `n,first,second,crossover_tau_s`, one row per crossing.
    pub fn write_crossovers_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["n", "first", "second", "crossover_tau_s"])?;
        for c in &self.crossovers {
            let (n, a, b) = (c.n.to_string(), c.first.to_string(), c.second.to_string());
            if c.taus.is_empty() {
                out.write_record([&n, &a, &b, "none in grid"])?;
            }
            for t in &c.taus {
                out.write_record([n.clone(), a.clone(), b.clone(), t.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut text = String::new();
        for c in &self.crossovers {
            let where_ = if c.taus.is_empty() {
                "none in grid".to_string()
            } else {
                c.taus.iter().map(|t| format!("{t:.6e} s")).collect::<Vec<_>>().join(", ")
            };
            text.push_str(&format!("n={} {} vs {}: crossover {}\n", c.n, c.first, c.second, where_));
        }
        text
    }
}

/// Interpolated sign changes of `a − b`; differences within `tie` of zero
/// count as equal and never start a crossing.
pub fn crossings(taus: &[f64], a: &[f64], b: &[f64], tie: f64) -> Vec<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sign = |v: f64| if v.abs() <= tie { 0 } else if v > 0.0 { 1 } else { -1 };
    let mut out = Vec::new();
    for k in 0..d.len().saturating_sub(1) {
        if sign(d[k]) * sign(d[k + 1]) < 0 {
            let t = d[k] / (d[k] - d[k + 1]);
            out.push(taus[k] + t * (taus[k + 1] - taus[k]));
        }
    }
    out
}

/// Error probabilities of every family at every `n` on a shared `τ` grid,
/// with the crossings between each pair of families.
pub fn compare_sequences(
    families: &[SequenceFamily],
    model: &SpectrumModel,
    taus: &[f64],
    ns: &[usize],
    config: &QuadratureConfig,
) -> Result<ComparisonReport> {
    if families.is_empty() || ns.is_empty() || taus.is_empty() {
        return Err(Error::invalid("compare", "families, n list and tau grid must be non-empty"));
    }
    if families.iter().any(|f| f.kind == SequenceKind::Custom) {
        return Err(Error::invalid("families", "custom placements have a fixed pulse count"));
    }
    if families.iter().any(|f| f.tau_pi != families[0].tau_pi) {
        return Err(Error::invalid("families", "all families must share tau_pi"));
    }
    let mut grid = taus.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let jobs: Vec<(usize, SequenceFamily)> = ns
        .iter()
        .flat_map(|&n| families.iter().map(move |f| (n, SequenceFamily { n, ..f.clone() })))
        .collect();
    let curves = jobs
        .par_iter()
        .map(|(_, f)| coherence_curve(f, model, &grid, config))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for ((n, f), curve) in jobs.iter().zip(&curves) {
        rows.extend(curve.points.iter().map(|p| ComparisonRow {
            tau: p.tau,
            n: *n,
            kind: f.kind,
            chi: p.chi,
            w: p.w,
            error_probability: p.error_probability,
        }));
    }
    let kinds: Vec<SequenceKind> = families.iter().map(|f| f.kind).collect();
    let mut crossovers = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        let block = &curves[j * families.len()..(j + 1) * families.len()];
        for a in 0..families.len() {
            for b in a + 1..families.len() {
                let (pa, pb) = (block[a].error_probabilities(), block[b].error_probabilities());
                let scale = pa.iter().chain(&pb).fold(0.0f64, |m, v| m.max(v.abs()));
                crossovers.push(Crossover {
                    n,
                    first: kinds[a],
                    second: kinds[b],
                    taus: crossings(&grid, &pa, &pb, 1e-9 * scale),
                });
            }
        }
    }
    Ok(ComparisonReport { taus: grid, ns: ns.to_vec(), kinds, rows, crossovers })
}
