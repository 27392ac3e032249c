//! Chart specs, native SVG rendering and plotting-script emission.

mod script;
mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::ChartData;
use crate::typing::{profile_data, ChartType, XKind, MAX_PIE_SEGMENTS};

pub use script::emit_plot_script;
pub use svg::{count_marks, render_svg};

pub const DEFAULT_WIDTH: u32 = 800;
pub const DEFAULT_HEIGHT: u32 = 500;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("{chart_type} is incompatible with this data: {reason}")]
    IncompatibleChartType { chart_type: ChartType, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub data: ChartData,
    pub width: u32,
    pub height: u32,
    pub legend: bool,
}

/// Check `chart_type` against the data and derive the spec.
///
/// - grouped_bar needs categories
/// - stacked_bar needs categories, or a single series of non-negative values
///   (drawn as one stacked column)
/// - pie needs a single proportional series of at most six segments
/// - scatter needs numeric or temporal x values
pub fn build_spec(data: &ChartData, chart_type: ChartType) -> Result<ChartSpec, RenderError> {
    let fail = |reason: String| Err(RenderError::IncompatibleChartType { chart_type, reason });
    let profile = profile_data(data);
    let has_categories = data.has_categories();
    match chart_type {
        ChartType::GroupedBar if !has_categories => return fail("grouped_bar requires categories".into()),
        ChartType::StackedBar if !has_categories && data.values.iter().any(|p| p.y < 0.0) => {
            return fail("stacked_bar without categories requires non-negative values".into())
        }
        ChartType::Pie if profile.category_count > 1 => return fail("pie requires a single series".into()),
        ChartType::Pie if profile.point_count > MAX_PIE_SEGMENTS => {
            return fail(format!("pie allows at most {MAX_PIE_SEGMENTS} segments, data has {}", profile.point_count))
        }
        ChartType::Pie if !profile.is_proportional => {
            return fail("pie requires proportional data (non-negative values summing to about 100)".into())
        }
        ChartType::Scatter if profile.x_kind == XKind::Categorical => {
            return fail("scatter requires numeric or temporal x values".into())
        }
        _ => {}
    }
    let single_stack = chart_type == ChartType::StackedBar && !has_categories;
    Ok(ChartSpec {
        chart_type,
        data: data.clone(),
        width: DEFAULT_WIDTH,
        height: DEFAULT_HEIGHT,
        legend: has_categories || chart_type == ChartType::Pie || single_stack,
    })
}

/// Legend entries: categories in first-appearance order, or the x labels for
/// charts that color by point.
pub fn legend_entries(spec: &ChartSpec) -> Vec<String> {
    if spec.data.has_categories() && spec.chart_type != ChartType::Pie {
        spec.data.categories().into_iter().map(str::to_string).collect()
    } else if spec.legend {
        spec.data.values.iter().map(|p| p.x.to_string()).collect()
    } else {
        Vec::new()
    }
}
