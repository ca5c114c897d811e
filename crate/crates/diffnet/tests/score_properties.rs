//! Property tests for the score equations: range bounds, scale and
//! temperature invariances, and the coefficient reductions.

use diffnet::scores::{
    differential_scores, generalized_scores, nondifferential_scores, predict,
    DetectorCoefficients,
};
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        (1e-12f64..1e6),
        (0.0f64..1.0),
    ]
}

fn signal_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(signal(), len)
}

proptest! {
    #[test]
    fn differential_raw_is_bounded(pos in signal_vec(10), neg in signal_vec(10), t in 1e-3f64..10.0) {
        let scores = differential_scores(&pos, &neg, t).unwrap();
        for &raw in scores.raw() {
            prop_assert!((-1.0..=1.0).contains(&raw), "raw {raw} out of range");
        }
        for (raw, scaled) in scores.raw().iter().zip(scores.scaled()) {
            prop_assert_eq!(*scaled, raw / t);
        }
    }

    #[test]
    fn predict_ignores_temperature(pos in signal_vec(10), neg in signal_vec(10)) {
        let cold = differential_scores(&pos, &neg, 0.1).unwrap();
        let hot = differential_scores(&pos, &neg, 10.0).unwrap();
        prop_assert_eq!(predict(&cold), predict(&hot));
    }

    #[test]
    fn predict_ignores_common_signal_scale(
        pos in signal_vec(10),
        neg in signal_vec(10),
        scale in 1e-6f64..1e6,
    ) {
        let base = differential_scores(&pos, &neg, 0.1).unwrap();
        let scaled_pos: Vec<f64> = pos.iter().map(|s| s * scale).collect();
        let scaled_neg: Vec<f64> = neg.iter().map(|s| s * scale).collect();
        let scaled = differential_scores(&scaled_pos, &scaled_neg, 0.1).unwrap();
        prop_assert_eq!(predict(&base), predict(&scaled));
    }

    #[test]
    fn nondifferential_scale_invariance(signals in signal_vec(10), scale in 1e-6f64..1e6) {
        let base = nondifferential_scores(&signals, 0.1).unwrap();
        let scaled_in: Vec<f64> = signals.iter().map(|s| s * scale).collect();
        let scaled = nondifferential_scores(&scaled_in, 0.1).unwrap();
        for (a, b) in base.raw().iter().zip(scaled.raw()) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        prop_assert_eq!(predict(&base), predict(&scaled));
    }

    #[test]
    fn balanced_coefficients_reduce_to_differential(
        pos in signal_vec(10),
        neg in signal_vec(10),
        t in 1e-3f64..10.0,
    ) {
        let coeffs = DetectorCoefficients::balanced(10);
        let general = generalized_scores(&pos, &neg, &coeffs, t).unwrap();
        let plain = differential_scores(&pos, &neg, t).unwrap();
        // bit-identical, not approximately equal
        prop_assert_eq!(general, plain);
    }

    #[test]
    fn summation_coefficients_numerator(pos in signal_vec(4), neg in signal_vec(4)) {
        let coeffs = DetectorCoefficients {
            p: vec![1.0; 4],
            n: vec![-1.0; 4],
            learnable: false,
        };
        let scores = generalized_scores(&pos, &neg, &coeffs, 1.0).unwrap();
        for ((raw, &ip), &inn) in scores.raw().iter().zip(&pos).zip(&neg) {
            let total = ip + inn;
            if total > 0.0 {
                // numerator reduces to I+ + I−, so raw = 1 exactly
                prop_assert_eq!(*raw, (ip + inn) / total);
            } else {
                prop_assert_eq!(*raw, 0.0);
            }
        }
    }
}

#[test]
fn worked_score_examples() {
    let s = differential_scores(&[0.8], &[0.2], 0.1).unwrap();
    assert!((s.raw()[0] - 0.6).abs() < 1e-15);
    assert!((s.scaled()[0] - 6.0).abs() < 1e-12);
    let e = nondifferential_scores(&[2.0, 1.0, 1.0], 0.1).unwrap();
    assert_eq!(e.scaled(), &[10.0, 5.0, 5.0]);
}
