use std::f64::consts::{PI, TAU};

use ddsim::coherence::chi;
use ddsim::montecarlo::ensemble_coherence;
use ddsim::sequences::build_layout;
use ddsim::{Band, EnsembleConfig, QuadratureConfig, SequenceFamily, SequenceKind, SpectrumModel, Spur};
use proptest::prelude::*;

/// Composite Simpson on a fine uniform grid: slow, simple, independent of the
/// library quadrature.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for k in 1..panels {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn white_noise_echo_against_direct_integration() {
    // Single ideal echo: F = 16 sin⁴(x/4).
    let (s0, tau) = (3.0, 2e-3);
    let band = Band::new(TAU * 5.0, TAU * 5e3);
    let model = SpectrumModel::white(s0, band);
    let layout = build_layout(&SequenceFamily::cpmg(1, 0.0), tau).unwrap();
    let got = chi(&layout, &model, &QuadratureConfig::default()).unwrap().chi;
    let reference = 2.0 / PI
        * simpson(|w| s0 * 16.0 * (w * tau / 4.0).sin().powi(4) / (w * w), band.lo, band.hi, 400_000);
    assert!((got - reference).abs() < 1e-7 * reference, "{got} vs {reference}");
}

#[test]
fn long_band_white_free_induction_is_two_s0_tau() {
    let model = SpectrumModel::white(0.5, Band::new(1e-3, 1e9));
    let layout = build_layout(&SequenceFamily::cpmg(0, 0.0), 1e-3).unwrap();
    let got = chi(&layout, &model, &QuadratureConfig::default()).unwrap().chi;
    assert!((got - 2.0 * 0.5 * 1e-3).abs() < 1e-4 * 1e-3);
}

#[test]
fn spur_and_background_add() {
    let cfg = QuadratureConfig::default();
    let model = SpectrumModel::ambient(1.0, TAU * 100.0, vec![Spur::at_hz(153.0, 0.15)]).with_band(Band::new(TAU, TAU * 1e5));
    let layout = build_layout(&SequenceFamily::udd(4, 0.0), 8e-3).unwrap();
    let whole = chi(&layout, &model, &cfg).unwrap();
    let base = chi(&layout, &model.without_spurs(), &cfg).unwrap().chi;
    let spur = 0.15 * chi(&layout, &model.spurs_only(), &cfg).unwrap().chi;
    assert!((whole.chi - base - spur).abs() <= 4.0 * cfg.rel_tol * whole.chi, "{} vs {}", whole.chi, base + spur);
}

#[test]
fn tighter_tolerance_stays_within_reported_error() {
    let model = SpectrumModel::ohmic(1e3, TAU * 500.0);
    let layout = build_layout(&SequenceFamily::udd(6, 20e-6), 4e-3).unwrap();
    let loose = chi(&layout, &model, &QuadratureConfig::default()).unwrap();
    let tight = chi(&layout, &model, &QuadratureConfig { rel_tol: 5e-7, ..Default::default() }).unwrap();
    assert!((loose.chi - tight.chi).abs() <= loose.error.max(1e-15), "{loose:?} {tight:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chi_is_quadratic_in_amplitude(n in 0usize..8, udd in any::<bool>(), v in 0.05f64..20.0, tau in 5e-4f64..2e-2) {
        let kind = if udd { SequenceKind::Udd } else { SequenceKind::Cpmg };
        let layout = build_layout(&SequenceFamily::new(kind, n, 0.0), tau).unwrap();
        let model = SpectrumModel::ohmic(10.0, TAU * 500.0);
        let cfg = QuadratureConfig::default();
        let one = chi(&layout, &model, &cfg).unwrap().chi;
        let scaled = chi(&layout, &model.clone().with_scale(v), &cfg).unwrap().chi;
        prop_assert!((scaled - v * v * one).abs() <= 1e-9 * v * v * one);
    }
}

#[test]
fn monte_carlo_tracks_the_integral() {
    let model = SpectrumModel::ohmic(1.0, TAU * 500.0);
    let cfg = QuadratureConfig::default();
    for family in [SequenceFamily::cpmg(2, 20e-6), SequenceFamily::udd(3, 20e-6)] {
        let layout = family.layout(3e-3).unwrap();
        let expected = (-chi(&layout, &model, &cfg).unwrap().chi).exp();
        let est = ensemble_coherence(&layout, &model, &EnsembleConfig::new(1500, 99, 10e-6)).unwrap();
        assert!((est.w - expected).abs() <= (4.0 * est.stderr).max(0.02), "{family:?}: {} vs {expected}", est.w);
    }
}
