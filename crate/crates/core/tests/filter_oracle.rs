use ddsim::filter::{filter_closed_form, taylor_coefficients};
use ddsim::sequences::build_layout;
use ddsim::{SequenceFamily, SequenceKind, SequenceLayout};
use num_complex::Complex64;
use proptest::prelude::*;

/// iω ∫ s(t) e^{iωt} dt, with s = ±1 between pulse edges and 0 inside pulses,
/// integrated piece by piece in closed form.
fn reference_y(layout: &SequenceLayout, omega: f64) -> Complex64 {
    let i = Complex64::i();
    let half = 0.5 * layout.tau_pi;
    let mut edges = vec![0.0];
    for d in &layout.fractions {
        edges.push(d * layout.tau - half);
        edges.push(d * layout.tau + half);
    }
    edges.push(layout.tau);
    let mut total = Complex64::new(0.0, 0.0);
    for (k, pair) in edges.chunks(2).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * ((i * omega * pair[1]).exp() - (i * omega * pair[0]).exp());
    }
    total
}

fn kind() -> impl Strategy<Value = SequenceKind> {
    prop_oneof![Just(SequenceKind::Cpmg), Just(SequenceKind::Udd)]
}

proptest! {
    #[test]
    fn closed_form_matches_reference(kind in kind(), n in 0usize..=16, width in 0.0f64..0.3, log_x in -3.0f64..3.0) {
        let tau = 1e-2;
        let built = build_layout(&SequenceFamily::new(kind, n, width * tau / (n.max(1) as f64 + 1.0)), tau);
        prop_assume!(built.is_ok());
        let layout = built.unwrap();
        let x = 10f64.powf(log_x);
        let closed = filter_closed_form(&layout, x).f;
        let reference = reference_y(&layout, x / tau).norm_sqr();
        prop_assert!((closed - reference).abs() <= 1e-8 * reference.max(1.0), "{closed} vs {reference}");
    }

    #[test]
    fn time_reversal_leaves_filter_unchanged(kind in kind(), n in 1usize..=12, width in 0.0f64..0.2, x in 0.01f64..200.0) {
        let built = build_layout(&SequenceFamily::new(kind, n, width * 1e-3 / (n as f64 + 1.0)), 1e-3);
        prop_assume!(built.is_ok());
        let layout = built.unwrap();
        let a = filter_closed_form(&layout, x);
        let b = filter_closed_form(&layout.time_reversed(), x);
        prop_assert!((a.f - b.f).abs() <= 1e-10 * a.f.max(1.0));
        prop_assert!((a.y.conj().norm_sqr() - a.f).abs() <= 1e-12 * a.f.max(1.0));
    }
}

#[test]
fn filter_vanishes_at_zero_frequency() {
    for kind in [SequenceKind::Cpmg, SequenceKind::Udd] {
        for n in 0..=12 {
            for width in [0.0, 0.02, 0.2] {
                let layout = build_layout(&SequenceFamily::new(kind, n, width * 1e-3 / (n.max(1) as f64)), 1e-3).unwrap();
                assert!(filter_closed_form(&layout, 0.0).f.abs() < 1e-24, "{kind} n={n}");
            }
        }
    }
}

#[test]
fn uhrig_moments_vanish_to_order_n() {
    for n in 1..=8 {
        let layout = build_layout(&SequenceFamily::udd(n, 0.0), 1.0).unwrap();
        // Derivatives are coefficient times k!.
        let mut factorial = 1.0;
        let d: Vec<f64> = taylor_coefficients(&layout, n + 1)
            .iter()
            .enumerate()
            .map(|(k, c)| {
                factorial *= k.max(1) as f64;
                c.norm() * factorial
            })
            .collect();
        assert!(d[n + 1] > 1e-5, "n={n}: {}", d[n + 1]);
        for k in 1..=n {
            assert!(d[k] <= 1e-9 * d[n + 1], "n={n} k={k}");
        }
    }
}
