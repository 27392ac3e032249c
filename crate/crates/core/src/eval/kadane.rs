use serde::{Deserialize, Serialize};

use super::EvalError;

/// Statistic subtracted from a score row before the span search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "q")]
pub enum Centering {
    None,
    #[default]
    Mean,
    /// Linear-interpolated quantile, `q` in [0, 1].
    Quantile(f64),
}

impl Centering {
    pub fn statistic(&self, row: &[f64]) -> f64 {
        if row.is_empty() {
            return 0.0;
        }
        match *self {
            Centering::None => 0.0,
            // Offsetting by the first entry makes a constant row center to exact zeros.
            Centering::Mean => row[0] + row.iter().map(|v| v - row[0]).sum::<f64>() / row.len() as f64,
            Centering::Quantile(q) => {
                let mut sorted = row.to_vec();
                sorted.sort_by(f64::total_cmp);
                let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
                let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
                sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
            }
        }
    }
}

/// Inclusive token span with its centered score sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub sum: f64,
}

/// Maximum-sum contiguous run of the centered row.
///
/// Ties go to the smallest start, then the shortest span. A row with no
/// positive entry yields its largest single element.
pub fn kadane_best_span(row: &[f64], centering: Centering) -> Result<Span, EvalError> {
    if row.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let shift = centering.statistic(row);
    let mut best = Span { start: 0, end: 0, sum: row[0] - shift };
    let mut cur_start = 0;
    let mut cur_sum = 0.0;
    for (i, &raw) in row.iter().enumerate() {
        let v = raw - shift;
        // Only a strictly negative prefix is dropped: extending through a zero
        // prefix keeps the earlier start on equal sums.
        if i > 0 && cur_sum < 0.0 {
            cur_start = i;
            cur_sum = 0.0;
        }
        cur_sum += v;
        let better = cur_sum > best.sum
            || (cur_sum == best.sum
                && (cur_start < best.start || (cur_start == best.start && i - cur_start < best.end - best.start)));
        if better {
            best = Span { start: cur_start, end: i, sum: cur_sum };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = kadane_best_span(&[0.1, -0.3, 0.5, 0.4, -0.2], Centering::None).unwrap();
        assert_eq!((s.start, s.end), (2, 3));
        assert!((s.sum - 0.9).abs() < 1e-12);
        let s = kadane_best_span(&[1.0, 1.0, 9.0, 1.0], Centering::Mean).unwrap();
        assert_eq!((s.start, s.end, s.sum), (2, 2, 6.0));
        let s = kadane_best_span(&[0.4; 6], Centering::Mean).unwrap();
        assert_eq!((s.start, s.end), (0, 0));
        assert_eq!(kadane_best_span(&[], Centering::Mean), Err(EvalError::EmptyInput));
    }

    #[test]
    fn all_negative_takes_max() {
        let s = kadane_best_span(&[-3.0, -1.0, -2.0, -1.0], Centering::None).unwrap();
        assert_eq!((s.start, s.end, s.sum), (1, 1, -1.0));
    }

    #[test]
    fn quantile() {
        assert_eq!(Centering::Quantile(0.5).statistic(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(Centering::Quantile(1.0).statistic(&[4.0, 1.0]), 4.0);
    }
}
