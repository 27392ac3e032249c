mod common;

use doc2chart::eval::{kadane_best_span, Centering};
use proptest::prelude::*;

#[test]
fn thousand_random_vectors() {
    common::check_kadane(1_000, 1).unwrap();
}

proptest! {
    // Small integers make sums exact, so ties really occur and the
    // tie-breaking has to agree with the oracle.
    #[test]
    fn integer_rows_match_oracle(row in prop::collection::vec(-3i32..=3, 1..40)) {
        let row: Vec<f64> = row.into_iter().map(f64::from).collect();
        let (start, end, sum) = common::brute_force_span(&row);
        let got = kadane_best_span(&row, Centering::None).unwrap();
        prop_assert_eq!((got.start, got.end, got.sum), (start, end, sum));
    }

    #[test]
    fn span_is_in_bounds_and_sum_is_consistent(
        row in prop::collection::vec(-1.0f64..1.0, 1..64),
        q in 0.0f64..=1.0,
    ) {
        for centering in [Centering::None, Centering::Mean, Centering::Quantile(q)] {
            let span = kadane_best_span(&row, centering).unwrap();
            prop_assert!(span.start <= span.end && span.end < row.len());
            let shift = centering.statistic(&row);
            let direct: f64 = row[span.start..=span.end].iter().map(|v| v - shift).sum();
            prop_assert!((direct - span.sum).abs() < 1e-9);
            // No single element beats the best span.
            prop_assert!(row.iter().all(|v| v - shift <= span.sum + 1e-9));
        }
    }

    #[test]
    fn constant_rows_pick_the_first_token(v in -1.0f64..1.0, n in 1usize..30) {
        let span = kadane_best_span(&vec![v; n], Centering::Mean).unwrap();
        prop_assert_eq!((span.start, span.end, span.sum), (0, 0, 0.0));
    }
}
