//! Grid evaluation, recoverability maps, boundary AUC, reliability F and proxy fits.

mod eval;
pub mod io;
mod map;
mod proxy;

pub use eval::{
    eval_grid, grid_sample, indicator, sample_key, CellStats, DensityRule, EvalTable, GridConfig,
    GridExtent,
};
pub use map::{
    boundary_auc, boundary_points, enclosed_area, envelopes, interior_failure_cells, max_map,
    reliability, reliability_score, BoolGrid, Envelopes, IndicatorChannel, InteriorFailure, RecMap,
    DEFAULT_THRESHOLD, RECMAP_FORMAT_VERSION,
};
pub use proxy::{
    binned_means, ols, proxy_fit, proxy_points, Bin, ProxyFit, DEFAULT_BINS,
    PROXY_FORMAT_VERSION,
};

use crate::error::Result;

/// Thresholds a complete table and computes the full map analytics.
pub fn recmap_from_table(table: &EvalTable, threshold: f64, channel: IndicatorChannel) -> Result<RecMap> {
    let grid = indicator(table, threshold, channel)?;
    RecMap::from_grid(&grid, threshold, channel, table.failed_count())
}
