use ddsim::sequences::{build_layout, cpmg_fractions, round_to_grid, udd_fractions};
use ddsim::{Error, SequenceFamily, SequenceKind};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = SequenceKind> {
    prop_oneof![Just(SequenceKind::Cpmg), Just(SequenceKind::Udd)]
}

proptest! {
    #[test]
    fn built_layouts_always_validate(kind in kind(), n in 0usize..40, tau in 1e-5f64..1.0, width in 0.0f64..0.05) {
        let tau_pi = width * tau / (n.max(1) as f64);
        match build_layout(&SequenceFamily::new(kind, n, tau_pi), tau) {
            Ok(layout) => {
                prop_assert!(layout.validate().is_ok());
                prop_assert_eq!(layout.fractions.len(), n);
            }
            Err(e) => prop_assert!(matches!(e, Error::Layout(_)), "{e}"),
        }
    }

    #[test]
    fn grid_rounding_is_idempotent(kind in kind(), n in 1usize..20, tau in 2e-3f64..5e-2, quantum_us in 1u32..20) {
        let quantum = quantum_us as f64 * 1e-6;
        let layout = build_layout(&SequenceFamily::new(kind, n, 0.0), tau).unwrap();
        if let Ok(once) = round_to_grid(&layout, quantum) {
            let twice = round_to_grid(&once, quantum).unwrap();
            prop_assert_eq!(&once.fractions, &twice.fractions);
            prop_assert_eq!(once.tau, twice.tau);
        }
    }

    #[test]
    fn uhrig_placement_is_mirror_symmetric(n in 0usize..=64) {
        let d = udd_fractions(n);
        for j in 0..n {
            prop_assert!((d[j] + d[n - 1 - j] - 1.0).abs() <= 2.0 * f64::EPSILON);
        }
    }
}

#[test]
fn short_uhrig_is_periodic() {
    for n in 0..=2 {
        assert_eq!(udd_fractions(n), cpmg_fractions(n));
    }
}

#[test]
fn uhrig_reference_positions() {
    // sin²(πj/8) for n = 3.
    let d = udd_fractions(3);
    let expected = [0.146_446_609_406_726_2, 0.5, 0.853_553_390_593_273_8];
    for (a, b) in d.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
}
