use super::{ChartType, ChartTypeRecommendation, DataProfile, IntentClass, RankedType, XKind};

/// Confidence by rank: primary rule hit, secondary, fallback.
const RUBRIC: [f64; 3] = [9.0, 6.0, 3.0];

/// Largest slice count a pie may show.
pub const MAX_PIE_SEGMENTS: usize = 6;

/// Ranked chart types for a profile. Total and deterministic; every listed
/// type is renderable for data with that profile.
pub fn recommend_heuristic(profile: &DataProfile, intent: IntentClass) -> ChartTypeRecommendation {
    use ChartType::*;
    let n = profile.point_count;
    let c = profile.category_count;
    let multi = c >= 1;
    let segments = profile.segments();

    let (mut types, reason): (Vec<ChartType>, String) = match profile.x_kind {
        XKind::Numeric => (vec![Scatter, Line, Bar], "numeric x values suit a scatter plot".into()),
        XKind::Temporal if !profile.regular_spacing && multi => {
            (vec![GroupedBar, Line, Bar], "irregularly spaced time points with a grouping dimension".into())
        }
        XKind::Temporal if !profile.regular_spacing => {
            (vec![Bar, Line, Area], "irregularly spaced time points without a grouping dimension".into())
        }
        XKind::Temporal if n <= 3 && multi => {
            (vec![Bar, GroupedBar, Line], format!("time-based with {n} points (<=3)"))
        }
        XKind::Temporal if n <= 3 => (vec![Bar, Line, Area], format!("time-based with {n} points (<=3)")),
        XKind::Temporal if multi => (vec![Line, GroupedBar, StackedBar], format!("time-based with {n} points (4+)")),
        XKind::Temporal => (vec![Line, Area, Bar], format!("time-based with {n} points (4+)")),
        XKind::Categorical if (2..=5).contains(&c) => {
            let second = if profile.is_proportional { StackedBar } else { GroupedBar };
            let third = if profile.is_proportional { GroupedBar } else { StackedBar };
            (vec![Bar, second, third], format!("comparison across {c} categories (2-5)"))
        }
        XKind::Categorical if c >= 6 => {
            (vec![StackedBar, GroupedBar, Bar], format!("comparison across {c} categories (6+)"))
        }
        XKind::Categorical if profile.is_proportional && segments <= MAX_PIE_SEGMENTS => {
            (vec![Pie, Bar], format!("proportions over {segments} segments (<=6)"))
        }
        XKind::Categorical if profile.is_proportional => {
            (vec![StackedBar, Bar], format!("proportions over {segments} segments; a pie would be cluttered"))
        }
        XKind::Categorical => (vec![Bar], "single-series comparison of categories".into()),
    };

    let preferred = match intent {
        IntentClass::Magnitude => Some(Bar),
        IntentClass::Trend => Some(Line),
        IntentClass::Composition if types.contains(&Pie) => Some(Pie),
        IntentClass::Composition => Some(StackedBar),
        IntentClass::Unknown => None,
    };
    let mut overridden = false;
    if let Some(p) = preferred {
        if types.len() > 1 && types[1] == p {
            types.swap(0, 1);
            overridden = true;
        }
    }

    let ranked = types
        .iter()
        .enumerate()
        .map(|(rank, &chart_type)| {
            let justification = match rank {
                0 if overridden => format!("{reason}; the {} intent favours {chart_type}", intent_name(intent)),
                0 => format!("{reason}: {chart_type}"),
                _ => format!("alternative for {reason}: {chart_type}"),
            };
            RankedType { chart_type, justification, confidence: RUBRIC[rank] }
        })
        .collect();
    ChartTypeRecommendation { ranked }
}

fn intent_name(intent: IntentClass) -> &'static str {
    match intent {
        IntentClass::Magnitude => "magnitude",
        IntentClass::Trend => "trend",
        IntentClass::Composition => "composition",
        IntentClass::Unknown => "unknown",
    }
}
