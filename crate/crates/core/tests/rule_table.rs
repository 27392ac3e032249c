mod common;

use doc2chart::render::build_spec;
use doc2chart::typing::{profile_data, recommend_heuristic, IntentClass};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn heuristic_matches_committed_table() {
    common::check_rule_table().unwrap();
}

proptest! {
    #[test]
    fn every_ranked_type_renders(seed in any::<u64>(), intent in 0usize..4) {
        let intent = [IntentClass::Unknown, IntentClass::Magnitude, IntentClass::Trend, IntentClass::Composition][intent];
        let data = common::random_chart(&mut ChaCha8Rng::seed_from_u64(seed));
        let rec = recommend_heuristic(&profile_data(&data), intent);
        prop_assert!(!rec.ranked.is_empty() && rec.ranked.len() <= 3);
        for t in rec.types() {
            prop_assert!(build_spec(&data, t).is_ok(), "{} rejected for {:?}", t, profile_data(&data));
        }
    }
}
