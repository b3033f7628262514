use serde::{Deserialize, Serialize};

use super::eval::EvalTable;
use crate::error::{Error, Result};
use crate::metrics::{Metric, PSNR_INFINITY_SENTINEL};

pub const DEFAULT_BINS: usize = 20;
pub const PROXY_FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub center: f64,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation of the rates in the bin.
    pub std: f64,
}

/// Least-squares line of plate OCR rate on a per-cell image-quality metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyFit {
    pub format_version: String,
    pub metric: Metric,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Cells left out because they failed or carry no finite metric.
    pub excluded: usize,
    pub binned_means: Vec<Bin>,
}

/// `(metric mean, ocr_plate)` pairs used by [`proxy_fit`], in table order.
pub fn proxy_points(table: &EvalTable, metric: Metric) -> (Vec<(f64, f64)>, usize) {
    let mut pts = Vec::new();
    let mut excluded = 0;
    for c in &table.cells {
        let x = match metric {
            Metric::Psnr => c.psnr_mean,
            Metric::Ssim => c.ssim_mean,
        };
        let infinite = metric == Metric::Psnr && x >= PSNR_INFINITY_SENTINEL;
        if c.is_failed() || !x.is_finite() || infinite || !c.ocr_plate.is_finite() {
            excluded += 1;
        } else {
            pts.push((x, c.ocr_plate));
        }
    }
    (pts, excluded)
}

/// Ordinary least squares `y = slope·x + intercept`, with `R² := 0` for constant `y`.
pub fn ols(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all metric values are identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

/// Equal-width bins over the metric range; empty bins are omitted.
pub fn binned_means(points: &[(f64, f64)], bins: usize) -> Vec<Bin> {
    if points.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut groups = vec![Vec::new(); bins];
    for &(x, y) in points {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        groups[i].push(y);
    }
    groups
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(i, g)| {
            let n = g.len() as f64;
            let mean = g.iter().sum::<f64>() / n;
            let var = g.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
            Bin {
                center: lo + (i as f64 + 0.5) * width,
                count: g.len(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

pub fn proxy_fit(table: &EvalTable, metric: Metric, bins: usize) -> Result<ProxyFit> {
    let (pts, excluded) = proxy_points(table, metric);
    let (slope, intercept, r_squared) = ols(&pts)?;
    Ok(ProxyFit {
        format_version: PROXY_FORMAT_VERSION.to_string(),
        metric,
        slope,
        intercept,
        r_squared,
        n_points: pts.len(),
        excluded,
        binned_means: binned_means(&pts, bins),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let (s, b, r2) = ols(&pts).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response_has_zero_r2() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.4)).collect();
        let (s, b, r2) = ols(&pts).unwrap();
        assert_eq!((s, r2), (0.0, 0.0));
        assert!((b - 0.4).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(ols(&[(0.0, 0.0), (1.0, 1.0)]), Err(Error::TooFewPoints(2))));
    }

    #[test]
    fn bins_cover_all_points() {
        let pts: Vec<(f64, f64)> = (0..100).map(|i| (i as f64 / 10.0, (i % 7) as f64)).collect();
        let bins = binned_means(&pts, 20);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 100);
        assert!(bins.windows(2).all(|w| w[0].center < w[1].center));
        let one = binned_means(&[(1.0, 0.5), (1.0, 0.7)], 4);
        assert_eq!(one.len(), 1);
        assert!((one[0].std - 0.1).abs() < 1e-12);
    }
}
