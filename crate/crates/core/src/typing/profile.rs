use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{DataProfile, IntentClass, XKind};
use crate::chart::{ChartData, Scalar};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Granularity {
    Year,
    Quarter,
    Month,
    Day,
}

/// A parsed time label with an integer position on its granularity's axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalValue {
    pub granularity: Granularity,
    pub ordinal: i64,
}

const MONTHS: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];

struct Patterns {
    year: Regex,
    quarter_first: Regex,
    year_first: Regex,
    numeric_date: Regex,
    month_name: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        year: Regex::new(r"^(?:fy\s*)?(\d{4})$").unwrap(),
        quarter_first: Regex::new(r"^q([1-4])[\s\-/]*(?:fy\s*)?(\d{4})$").unwrap(),
        year_first: Regex::new(r"^(?:fy\s*)?(\d{4})[\s\-/]*q([1-4])$").unwrap(),
        numeric_date: Regex::new(r"^(\d{4})[-/](\d{1,2})(?:[-/](\d{1,2}))?$").unwrap(),
        month_name: Regex::new(r"^([a-z]{3})[a-z]*\.?[\s\-]*(\d{4})$").unwrap(),
    })
}

fn plausible_year(y: i64) -> bool {
    (1800..=2200).contains(&y)
}

fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Read a year, year-quarter, month or date label.
pub fn parse_temporal(x: &Scalar) -> Option<TemporalValue> {
    let tv = |granularity, ordinal| Some(TemporalValue { granularity, ordinal });
    let text = match x {
        Scalar::Number(v) => {
            let y = *v as i64;
            return (v.fract() == 0.0 && plausible_year(y))
                .then_some(TemporalValue { granularity: Granularity::Year, ordinal: y });
        }
        Scalar::Text(s) => s.trim().to_ascii_lowercase(),
    };
    let p = patterns();
    if let Some(c) = p.year.captures(&text) {
        let y: i64 = c[1].parse().ok()?;
        return if plausible_year(y) { tv(Granularity::Year, y) } else { None };
    }
    let quarter = p
        .quarter_first
        .captures(&text)
        .map(|c| (c[2].parse::<i64>(), c[1].parse::<i64>()))
        .or_else(|| p.year_first.captures(&text).map(|c| (c[1].parse(), c[2].parse())));
    if let Some((Ok(y), Ok(q))) = quarter {
        return if plausible_year(y) { tv(Granularity::Quarter, y * 4 + q - 1) } else { None };
    }
    if let Some(c) = p.numeric_date.captures(&text) {
        let y: i64 = c[1].parse().ok()?;
        let m: i64 = c[2].parse().ok()?;
        if !plausible_year(y) || !(1..=12).contains(&m) {
            return None;
        }
        return match c.get(3) {
            None => tv(Granularity::Month, y * 12 + m - 1),
            Some(d) => {
                let d: i64 = d.as_str().parse().ok()?;
                if (1..=31).contains(&d) {
                    tv(Granularity::Day, days_from_civil(y, m, d))
                } else {
                    None
                }
            }
        };
    }
    if let Some(c) = p.month_name.captures(&text) {
        let m = MONTHS.iter().position(|name| *name == &c[1])? as i64 + 1;
        let y: i64 = c[2].parse().ok()?;
        return if plausible_year(y) { tv(Granularity::Month, y * 12 + m - 1) } else { None };
    }
    None
}

pub fn profile_data(data: &ChartData) -> DataProfile {
    let xs = data.distinct_x();
    let point_count = xs.len().max(1);
    let categories = data.categories();
    let category_count = categories.len();

    let temporal: Option<Vec<TemporalValue>> = xs.iter().map(|x| parse_temporal(x)).collect();
    let temporal = temporal.filter(|t| t.windows(2).all(|w| w[0].granularity == w[1].granularity));
    let (x_kind, regular_spacing) = match temporal {
        Some(values) => {
            let mut ordinals: Vec<i64> = values.iter().map(|t| t.ordinal).collect();
            ordinals.sort_unstable();
            ordinals.dedup();
            let deltas: Vec<i64> = ordinals.windows(2).map(|w| w[1] - w[0]).collect();
            (XKind::Temporal, deltas.windows(2).all(|w| w[0] == w[1]))
        }
        None if xs.iter().all(|x| x.as_number().is_some()) => (XKind::Numeric, true),
        None => (XKind::Categorical, true),
    };

    let in_band = |s: f64| (99.0..=101.0).contains(&s);
    let nonnegative = data.values.iter().all(|p| p.y >= 0.0);
    let is_proportional = nonnegative
        && if category_count <= 1 {
            in_band(data.values.iter().map(|p| p.y).sum())
        } else {
            let mut groups: BTreeMap<String, f64> = BTreeMap::new();
            for p in &data.values {
                *groups.entry(p.x.key()).or_default() += p.y;
            }
            data.values.iter().all(|p| p.y <= 100.0) && groups.values().all(|&s| in_band(s))
        };

    DataProfile { x_kind, point_count, category_count, is_proportional, regular_spacing }
}

const COMPOSITION: &[&str] = &[
    "share",
    "composition",
    "breakdown",
    "proportion",
    "percentage",
    "percent",
    "split",
    "mix",
    "makeup",
    "portion",
    "allocation",
    "contribution",
];
const TREND: &[&str] = &[
    "trend",
    "time",
    "growth",
    "grow",
    "change",
    "evolution",
    "evolve",
    "history",
    "historical",
    "timeline",
    "trajectory",
    "annual",
    "yearly",
    "quarterly",
    "monthly",
    "increase",
    "decrease",
    "decline",
    "progression",
];
const MAGNITUDE: &[&str] = &[
    "compare",
    "comparison",
    "magnitude",
    "largest",
    "smallest",
    "top",
    "rank",
    "ranking",
    "highest",
    "lowest",
    "biggest",
    "size",
    "amount",
    "total",
    "volume",
];

/// Coarse intent class from keywords; the class with the most hits wins, ties
/// in the order composition, trend, magnitude.
pub fn classify_intent(intent: &str) -> IntentClass {
    // Stopwords such as "compare" still signal intent here.
    let words = text::words(intent);
    let hits = |list: &[&str]| words.iter().filter(|w| list.contains(&w.as_str())).count();
    let scored = [
        (hits(COMPOSITION), IntentClass::Composition),
        (hits(TREND), IntentClass::Trend),
        (hits(MAGNITUDE), IntentClass::Magnitude),
    ];
    let mut best = (0, IntentClass::Unknown);
    for (n, class) in scored {
        if n > best.0 {
            best = (n, class);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::DataPoint;

    fn series(xs: &[&str], ys: &[f64]) -> ChartData {
        let values = xs.iter().zip(ys).map(|(x, y)| DataPoint::new(*x, *y)).collect();
        ChartData::new(values, "x", "y", "t").unwrap()
    }

    #[test]
    fn years() {
        let p = profile_data(&series(&["2021", "2022", "2023"], &[1.0, 2.0, 3.0]));
        assert_eq!((p.x_kind, p.point_count, p.regular_spacing), (XKind::Temporal, 3, true));
        let p = profile_data(&series(&["2019", "2021", "2022"], &[1.0, 2.0, 3.0]));
        assert_eq!((p.x_kind, p.regular_spacing), (XKind::Temporal, false));
    }

    #[test]
    fn proportional_single_series() {
        let p = profile_data(&series(&["a", "b", "c"], &[40.0, 35.0, 25.0]));
        assert!(p.is_proportional);
        assert_eq!(p.x_kind, XKind::Categorical);
        assert!(!profile_data(&series(&["a", "b"], &[40.0, 35.0])).is_proportional);
    }

    #[test]
    fn temporal_forms() {
        let q = |s: &str| parse_temporal(&Scalar::Text(s.into())).map(|t| (t.granularity, t.ordinal));
        assert_eq!(q("Q1 2021"), Some((Granularity::Quarter, 2021 * 4)));
        assert_eq!(q("2021-Q4"), Some((Granularity::Quarter, 2021 * 4 + 3)));
        assert_eq!(q("FY2020"), Some((Granularity::Year, 2020)));
        assert_eq!(q("Mar 2021"), Some((Granularity::Month, 2021 * 12 + 2)));
        assert_eq!(q("2021-03"), q("March 2021"));
        assert_eq!(q("2021-03-02").unwrap().1 - q("2021-03-01").unwrap().1, 1);
        assert_eq!(q("North"), None);
        assert_eq!(q("12"), None);
        assert_eq!(parse_temporal(&Scalar::Number(2020.0)).unwrap().ordinal, 2020);
    }

    #[test]
    fn mixed_granularity_is_categorical() {
        assert_eq!(profile_data(&series(&["2021", "Q1 2022"], &[1.0, 2.0])).x_kind, XKind::Categorical);
        assert_eq!(profile_data(&series(&["1.5", "2.5"], &[1.0, 2.0])).x_kind, XKind::Numeric);
    }

    #[test]
    fn intents() {
        assert_eq!(classify_intent("revenue trend over the last five years"), IntentClass::Trend);
        assert_eq!(classify_intent("market share by vendor"), IntentClass::Composition);
        assert_eq!(classify_intent("compare the largest regions"), IntentClass::Magnitude);
        assert_eq!(classify_intent("compare regions"), IntentClass::Magnitude);
        assert_eq!(classify_intent("hotel revenue"), IntentClass::Unknown);
    }
}
