use std::f64::consts::TAU;

use ddsim::coherence::chi;
use ddsim::filter::toggle_function;
use ddsim::montecarlo::{accumulate_phase, ensemble_coherence, ensemble_coherence_many, evolve_sequence};
use ddsim::sequences::build_layout;
use ddsim::{ControlErrorModel, EnsembleConfig, PulseAxis, QuadratureConfig, SequenceFamily, SequenceKind, SpectrumModel, TraceSynthesizer};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = SequenceKind> {
    prop_oneof![Just(SequenceKind::Cpmg), Just(SequenceKind::Udd)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rotations_preserve_the_bloch_norm(
        kind in kind(),
        n in 0usize..10,
        eps in -0.5f64..0.5,
        delta in -1e4f64..1e4,
        theta in 0.0f64..TAU,
        seed in 0u64..1000,
    ) {
        let layout = build_layout(&SequenceFamily::new(kind, n, 20e-6), 5e-3).unwrap();
        let model = SpectrumModel::ohmic(1.0, TAU * 500.0);
        let trace = TraceSynthesizer::new(&model, 5e-3, 1e-6).unwrap().trace(seed, 0);
        let errors = ControlErrorModel { noise_during_pulses: seed % 2 == 0, ..Default::default() }
            .with_pulse_length_scale(eps)
            .with_static_detuning(delta)
            .with_initial_phase(theta);
        let out = evolve_sequence(&layout, Some(&trace), &errors).unwrap();
        prop_assert!((out.final_state.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bloch_phase_equals_gated_phase(kind in kind(), n in 0usize..10, seed in 0u64..1000) {
        let layout = build_layout(&SequenceFamily::new(kind, n, 0.0), 4e-3).unwrap();
        let model = SpectrumModel::ohmic(30.0, TAU * 500.0);
        let trace = TraceSynthesizer::new(&model, 4e-3, 1e-6).unwrap().trace(seed, 3);
        let phi = accumulate_phase(&toggle_function(&layout), &trace).unwrap();
        let out = evolve_sequence(&layout, Some(&trace), &ControlErrorModel::default()).unwrap();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let diff = (out.phase_error() - sign * phi + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
        prop_assert!(diff.abs() < 1e-6, "{} vs {}", out.phase_error(), sign * phi);
    }

    #[test]
    fn pulse_axis_plans_agree(n in 1usize..10, seed in 0u64..1000, udd in any::<bool>()) {
        let kind = if udd { SequenceKind::Udd } else { SequenceKind::Cpmg };
        let x = build_layout(&SequenceFamily::new(kind, n, 50e-6), 6e-3).unwrap();
        let y = build_layout(&SequenceFamily::new(kind, n, 50e-6).with_axis(PulseAxis::YEffective), 6e-3).unwrap();
        let model = SpectrumModel::ohmic(30.0, TAU * 500.0);
        let trace = TraceSynthesizer::new(&model, 6e-3, 2e-6).unwrap().trace(seed, 1);
        let errors = ControlErrorModel::default();
        let px = evolve_sequence(&x, Some(&trace), &errors).unwrap().final_state.bright_population();
        let py = evolve_sequence(&y, Some(&trace), &errors).unwrap().final_state.bright_population();
        prop_assert!((px - py).abs() < 1e-9);
    }
}

#[test]
fn ensemble_envelope_shrinks_with_size() {
    let model = SpectrumModel::ohmic(1.0, TAU * 500.0);
    let layout = SequenceFamily::udd(4, 20e-6).layout(4e-3).unwrap();
    let expected = (-chi(&layout, &model, &QuadratureConfig::default()).unwrap().chi).exp();
    let mut errors = Vec::new();
    for size in [200, 800, 3200] {
        let est = ensemble_coherence(&layout, &model, &EnsembleConfig::new(size, 17, 10e-6)).unwrap();
        assert!((est.w - expected).abs() <= 4.0 * est.stderr + 5e-3, "{size}: {} vs {expected}", est.w);
        errors.push(est.stderr);
    }
    // Quadrupling the ensemble halves the error, within batch-means noise.
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.3..3.0).contains(&ratio), "{errors:?}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let model = SpectrumModel::ohmic(1.0, TAU * 500.0);
    let layouts: Vec<_> = [2e-3, 3e-3, 5e-3].iter().map(|&t| SequenceFamily::cpmg(3, 20e-6).layout(t).unwrap()).collect();
    let cfg = EnsembleConfig::new(300, 5, 10e-6);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble_coherence_many(&layouts, &model, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn zero_amplitude_closes_dark() {
    let model = SpectrumModel::ohmic(1.0, TAU * 500.0).with_scale(0.0);
    let layout = SequenceFamily::udd(7, 30e-6).layout(6e-3).unwrap();
    let trace = TraceSynthesizer::new(&model, 6e-3, 1e-6).unwrap().trace(1, 0);
    let out = evolve_sequence(&layout, Some(&trace), &ControlErrorModel::default()).unwrap();
    assert!(out.final_state.bright_population() < 1e-9);
    let est = ensemble_coherence(&layout, &model, &EnsembleConfig::new(20, 1, 5e-6)).unwrap();
    assert_eq!(est.w, 1.0);
}
