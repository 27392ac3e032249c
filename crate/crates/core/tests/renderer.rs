mod common;

use doc2chart::render::{build_spec, count_marks, render_svg};
use doc2chart::typing::ChartType;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn hundred_random_specs() {
    common::check_renderer(100, 5).unwrap();
}

proptest! {
    #[test]
    fn bar_and_line_marks_equal_values(seed in any::<u64>()) {
        let data = common::random_chart(&mut ChaCha8Rng::seed_from_u64(seed));
        for t in [ChartType::Bar, ChartType::Line, ChartType::Area] {
            let svg = render_svg(&build_spec(&data, t).unwrap());
            prop_assert_eq!(count_marks(&svg), data.values.len());
        }
    }
}
