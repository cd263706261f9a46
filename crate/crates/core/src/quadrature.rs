//! Globally adaptive Gauss–Kronrod (7/15) integration over a set of panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and grid controls for the dephasing integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Stop once the summed error estimate is below `rel_tol · |I|`.
    pub rel_tol: f64,
    /// Absolute floor on the error target.
    pub abs_tol: f64,
    /// Upper bound on bisections across all panels.
    pub max_subdivisions: usize,
    /// Log-spaced panel boundaries per decade of the band.
    pub panels_per_decade: usize,
    /// Cap on the number of uniform panels laid on the oscillation scale.
    pub max_uniform_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-6,
            abs_tol: 1e-15,
            max_subdivisions: 200_000,
            panels_per_decade: 10,
            max_uniform_panels: 4_000,
        }
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Interval {}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Interval {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Interval { a, b, value, error }
}

/// Integrates `f` over `[points[0], points[last]]`, starting from one Kronrod
/// panel per consecutive pair of `points` and repeatedly bisecting the panel
/// with the largest error estimate.
pub fn integrate(f: impl Fn(f64) -> f64, points: &[f64], config: &QuadratureConfig) -> Result<QuadEstimate> {
    if points.len() < 2 {
        return Err(Error::invalid("points", "need at least two panel boundaries"));
    }
    if points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("points", "panel boundaries must be strictly increasing"));
    }
    let mut heap: BinaryHeap<Interval> = points.windows(2).map(|w| kronrod(&f, w[0], w[1])).collect();
    let sum = |heap: &BinaryHeap<Interval>| {
        // Summed in a fixed order so the result does not depend on heap layout.
        let mut parts: Vec<(f64, f64, f64)> = heap.iter().map(|iv| (iv.a, iv.value, iv.error)).collect();
        parts.sort_by(|x, y| x.0.total_cmp(&y.0));
        parts.iter().fold((0.0, 0.0), |(v, e), p| (v + p.1, e + p.2))
    };
    let (mut value, mut error) = sum(&heap);
    let mut previous = value;
    let mut subdivisions = 0;
    loop {
        if !value.is_finite() {
            return Err(Error::NotConverged { subdivisions, previous, last: value });
        }
        if error <= config.abs_tol.max(config.rel_tol * value.abs()) {
            break;
        }
        if subdivisions >= config.max_subdivisions {
            return Err(Error::NotConverged { subdivisions, previous, last: value });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Panel too narrow to split; accept what we have.
            heap.push(Interval { error: 0.0, ..worst });
        } else {
            let left = kronrod(&f, worst.a, mid);
            let right = kronrod(&f, mid, worst.b);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }
        subdivisions += 1;
        if subdivisions % 64 == 0 {
            previous = value;
            (value, error) = sum(&heap);
        }
    }
    let (value, error) = sum(&heap);
    Ok(QuadEstimate { value, error, subdivisions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, &[0.0, 2.0], &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(q.value, 64.0 / 6.0 - 8.0, max_relative = 1e-14);
    }

    #[test]
    fn oscillatory_sinc_squared() {
        // ∫₀^L sin²(x)/x² dx → π/2 - 1/(2L) + O(L^-2)
        let points: Vec<f64> = (0..=200).map(|k| k as f64 * 5.0).collect();
        let q = integrate(|x: f64| if x == 0.0 { 1.0 } else { (x.sin() / x).powi(2) }, &points, &QuadratureConfig::default())
            .unwrap();
        let l = 1000.0f64;
        // Si(2L) - sin²(L)/L with the leading asymptotic term of Si.
        let exact = std::f64::consts::FRAC_PI_2 - (2.0 * l).cos() / (2.0 * l) - l.sin().powi(2) / l;
        assert!((q.value - exact).abs() < 3e-6);
    }

    #[test]
    fn reports_non_convergence() {
        let config = QuadratureConfig { max_subdivisions: 3, ..Default::default() };
        let err = integrate(|x: f64| (1.0 / x).sin(), &[1e-6, 1.0], &config).unwrap_err();
        assert!(matches!(err, Error::NotConverged { subdivisions: 3, .. }));
    }
}
