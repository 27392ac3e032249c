mod common;

use doc2chart::eval::{score_chart_data, LexicalProvider, Reference, ScoreOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn verbatim_and_perturbed_pairs() {
    common::check_attribution(50, 2).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_stay_in_range(seed in any::<u64>(), drop in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (table, mut chart) = common::synthetic_pair(&mut rng);
        // Dropping points lowers recall but never precision.
        let keep = chart.values.len().saturating_sub(drop).max(1);
        chart.values.truncate(keep);
        let s = score_chart_data(&chart, Reference::Table(&table), &LexicalProvider, ScoreOptions::default()).unwrap();
        let recall = s.reference_recall.unwrap();
        prop_assert_eq!(s.grounding_precision, 100.0);
        prop_assert!((0.0..=100.0).contains(&recall));
        prop_assert!(s.chart_data_accuracy <= s.grounding_precision.max(recall) + 1e-9);
        prop_assert!(s.chart_data_accuracy >= s.grounding_precision.min(recall) - 1e-9);
        prop_assert_eq!(s.attribution.len(), chart.values.len());
    }
}
