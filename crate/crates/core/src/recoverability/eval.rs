use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::{BoolGrid, IndicatorChannel};
use crate::degradation::{DegradationParams, Pipeline};
use crate::error::{Error, Result};
use crate::geometry::AnglePair;
use crate::metrics::{psnr_for_file, score};
use crate::plate::{render_plate, PLATE_HEIGHT, PLATE_WIDTH};
use crate::restorers::Restorer;
use crate::rng::{domain, keyed, random_digits};

/// Images per cell: `easy_n` where both angles are at most `easy_cutoff`, else `hard_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityRule {
    pub easy_n: usize,
    pub hard_n: usize,
    pub easy_cutoff: u32,
}

impl Default for DensityRule {
    fn default() -> Self {
        DensityRule {
            easy_n: 2,
            hard_n: 10,
            easy_cutoff: 60,
        }
    }
}

impl DensityRule {
    pub fn images_for(&self, alpha: u32, beta: u32) -> usize {
        if alpha <= self.easy_cutoff && beta <= self.easy_cutoff {
            self.easy_n
        } else {
            self.hard_n
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.easy_n == 0 || self.hard_n == 0 {
            return Err(Error::OutOfRange("images per cell must be at least 1".into()));
        }
        if self.easy_n.max(self.hard_n) > u16::MAX as usize {
            return Err(Error::OutOfRange(format!("at most {} images per cell", u16::MAX)));
        }
        Ok(())
    }
}

/// Inclusive integer angle ranges visited by a grid run, alpha-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridExtent {
    pub alpha: (u32, u32),
    pub beta: (u32, u32),
}

impl Default for GridExtent {
    fn default() -> Self {
        GridExtent {
            alpha: (0, 89),
            beta: (0, 89),
        }
    }
}

impl GridExtent {
    pub fn square(max: u32) -> Self {
        GridExtent {
            alpha: (0, max),
            beta: (0, max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.alpha, self.beta] {
            if lo > hi || hi > 89 {
                return Err(Error::OutOfRange(format!(
                    "angle range [{lo}, {hi}] must be ordered and within [0, 89]"
                )));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for a in self.alpha.0..=self.alpha.1 {
            for b in self.beta.0..=self.beta.1 {
                out.push((a, b));
            }
        }
        out
    }
}

/// Aggregated scores of one `(alpha, beta)` cell. Metric fields are NaN for failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub alpha: u32,
    pub beta: u32,
    pub n_images: usize,
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    pub psnr_worst_digit: f64,
    pub ssim_worst_digit: f64,
    pub ocr_digit: f64,
    /// Fraction of images whose six digits are all read correctly.
    pub ocr_plate: f64,
    pub failed: Option<String>,
}

impl CellStats {
    pub fn failed(alpha: u32, beta: u32, n_images: usize, reason: String) -> Self {
        CellStats {
            alpha,
            beta,
            n_images,
            psnr_mean: f64::NAN,
            ssim_mean: f64::NAN,
            psnr_worst_digit: f64::NAN,
            ssim_worst_digit: f64::NAN,
            ocr_digit: f64::NAN,
            ocr_plate: f64::NAN,
            failed: Some(reason),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failed.is_some()
    }

    pub fn rate(&self, channel: IndicatorChannel) -> f64 {
        match channel {
            IndicatorChannel::Plate => self.ocr_plate,
            IndicatorChannel::Digit => self.ocr_digit,
        }
    }
}

/// Per-cell evaluation results in alpha-major order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalTable {
    pub cells: Vec<CellStats>,
}

impl EvalTable {
    pub fn get(&self, alpha: u32, beta: u32) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.alpha == alpha && c.beta == beta)
    }

    pub fn failed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_failed()).count()
    }

    /// Side length `n` when the table covers `[0, n−1]²` exactly once.
    pub fn square_size(&self) -> Result<usize> {
        let max = self
            .cells
            .iter()
            .map(|c| c.alpha.max(c.beta))
            .max()
            .ok_or_else(|| Error::IncompleteTable("table is empty".into()))?;
        let n = max as usize + 1;
        let mut seen = vec![false; n * n];
        for c in &self.cells {
            let i = c.alpha as usize * n + c.beta as usize;
            if seen[i] {
                return Err(Error::IncompleteTable(format!(
                    "cell ({}, {}) appears twice",
                    c.alpha, c.beta
                )));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::IncompleteTable(format!(
                "{} of {} cells present; first missing cell is ({}, {})",
                self.cells.len(),
                n * n,
                i / n,
                i % n
            )));
        }
        Ok(n)
    }
}

/// Recoverability indicator: cell rate `≥ threshold`. Failed cells are not recoverable.
pub fn indicator(table: &EvalTable, threshold: f64, channel: IndicatorChannel) -> Result<BoolGrid> {
    let n = table.square_size()?;
    let mut g = BoolGrid::new(n, false);
    for c in &table.cells {
        g.set(c.alpha as usize, c.beta as usize, !c.is_failed() && c.rate(channel) >= threshold);
    }
    Ok(g)
}

/// Key index of image `k` in cell `(alpha, beta)`; independent of extent and density.
pub fn sample_key(alpha: u32, beta: u32, k: usize) -> u64 {
    ((alpha as u64) << 32) | ((beta as u64) << 16) | k as u64
}

/// The clean plate and degradation parameters of image `k` in a cell.
pub fn grid_sample(seed: u64, alpha: u32, beta: u32, k: usize) -> (String, DegradationParams) {
    let mut rng = keyed(seed, domain::GRID_SAMPLE, sample_key(alpha, beta, k));
    let digits = random_digits(&mut rng);
    let params = DegradationParams::sample(AnglePair::new(alpha as f64, beta as f64), &mut rng);
    (digits, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub seed: u64,
    pub extent: GridExtent,
    pub density: DensityRule,
}

impl GridConfig {
    pub fn new(seed: u64) -> Self {
        GridConfig {
            seed,
            extent: GridExtent::default(),
            density: DensityRule::default(),
        }
    }
}

#[derive(Default)]
struct Sums {
    psnr: f64,
    ssim: f64,
    psnr_worst: f64,
    ssim_worst: f64,
    digit: f64,
    plate: usize,
}

fn eval_cell(cfg: &GridConfig, pipeline: &Pipeline, restorer: &Restorer, alpha: u32, beta: u32, job: usize) -> Result<CellStats> {
    let n = cfg.density.images_for(alpha, beta);
    let mut s = Sums::default();
    for k in 0..n {
        let (digits, params) = grid_sample(cfg.seed, alpha, beta, k);
        let truth = render_plate(&digits)?;
        let sample = pipeline.degrade(&truth, &params, cfg.seed)?;
        let restored = match restorer.restore_indexed(&sample.input, job) {
            Ok(img) => img,
            Err(e) => {
                return Ok(CellStats::failed(
                    alpha,
                    beta,
                    n,
                    format!("cell ({alpha}, {beta}) image {k}: {e}"),
                ))
            }
        };
        if restored.dims() != (PLATE_WIDTH, PLATE_HEIGHT, 3) {
            let (w, h, c) = restored.dims();
            return Ok(CellStats::failed(
                alpha,
                beta,
                n,
                format!("cell ({alpha}, {beta}) image {k}: restorer returned {w}x{h}x{c}"),
            ));
        }
        let q = score(&restored, &truth)?;
        s.psnr += psnr_for_file(q.psnr_plate);
        s.ssim += q.ssim_plate;
        s.psnr_worst += psnr_for_file(q.psnr_worst_digit);
        s.ssim_worst += q.ssim_worst_digit;
        s.digit += q.ocr_digit_acc;
        s.plate += q.ocr_plate_ok as usize;
    }
    let nf = n as f64;
    Ok(CellStats {
        alpha,
        beta,
        n_images: n,
        psnr_mean: s.psnr / nf,
        ssim_mean: s.ssim / nf,
        psnr_worst_digit: s.psnr_worst / nf,
        ssim_worst_digit: s.ssim_worst / nf,
        ocr_digit: s.digit / nf,
        ocr_plate: s.plate as f64 / nf,
        failed: None,
    })
}

/// Evaluates `restorer` over every cell of `cfg.extent` on the current rayon pool.
///
/// Restorer failures mark the affected cell failed and the run continues. `progress`
/// receives `(done, total)` after each finished cell.
pub fn eval_grid(
    cfg: &GridConfig,
    pipeline: &Pipeline,
    restorer: &Restorer,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<EvalTable> {
    cfg.extent.validate()?;
    cfg.density.validate()?;
    let cells = cfg.extent.cells();
    let total = cells.len();
    let done = AtomicUsize::new(0);
    let stats = cells
        .par_iter()
        .enumerate()
        .map(|(job, &(a, b))| {
            let r = eval_cell(cfg, pipeline, restorer, a, b, job);
            let d = done.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(p) = progress {
                p(d, total);
            }
            r
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalTable { cells: stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(alpha: u32, beta: u32, plate: f64) -> CellStats {
        CellStats {
            alpha,
            beta,
            n_images: 2,
            psnr_mean: 30.0,
            ssim_mean: 0.9,
            psnr_worst_digit: 28.0,
            ssim_worst_digit: 0.8,
            ocr_digit: plate,
            ocr_plate: plate,
            failed: None,
        }
    }

    #[test]
    fn density_rule_regions() {
        let d = DensityRule::default();
        assert_eq!(d.images_for(60, 60), 2);
        assert_eq!(d.images_for(61, 0), 10);
        assert_eq!(d.images_for(0, 61), 10);
        let total: usize = GridExtent::default()
            .cells()
            .iter()
            .map(|&(a, b)| d.images_for(a, b))
            .sum();
        assert_eq!(total, 61 * 61 * 2 + (8100 - 61 * 61) * 10);
    }

    #[test]
    fn indicator_threshold_is_inclusive() {
        let t = EvalTable {
            cells: vec![cell(0, 0, 0.9), cell(0, 1, 0.89), cell(1, 0, 1.0), cell(1, 1, 0.95)],
        };
        let g = indicator(&t, 0.9, IndicatorChannel::Plate).unwrap();
        assert!(g.get(0, 0));
        assert!(!g.get(0, 1));
        assert!(g.get(1, 0) && g.get(1, 1));
    }

    #[test]
    fn failed_cells_are_not_recoverable() {
        let mut t = EvalTable {
            cells: vec![cell(0, 0, 1.0), cell(0, 1, 1.0), cell(1, 0, 1.0), cell(1, 1, 1.0)],
        };
        t.cells[3] = CellStats::failed(1, 1, 2, "boom".into());
        let g = indicator(&t, 0.9, IndicatorChannel::Plate).unwrap();
        assert!(!g.get(1, 1));
        assert_eq!(t.failed_count(), 1);
    }

    #[test]
    fn incomplete_tables_rejected() {
        let t = EvalTable {
            cells: vec![cell(0, 0, 1.0), cell(1, 1, 1.0)],
        };
        assert!(matches!(indicator(&t, 0.9, IndicatorChannel::Plate), Err(Error::IncompleteTable(_))));
        let dup = EvalTable {
            cells: vec![cell(0, 0, 1.0), cell(0, 0, 1.0)],
        };
        assert!(matches!(dup.square_size(), Err(Error::IncompleteTable(_))));
        assert!(EvalTable::default().square_size().is_err());
    }

    #[test]
    fn sample_keys_are_shared_across_density() {
        let (d0, p0) = grid_sample(7, 12, 34, 0);
        let (d1, p1) = grid_sample(7, 12, 34, 0);
        assert_eq!((d0.clone(), p0), (d1, p1));
        let (d2, _) = grid_sample(7, 34, 12, 0);
        let (d3, _) = grid_sample(8, 12, 34, 0);
        assert!(d0 != d2 || d0 != d3);
        assert_ne!(sample_key(1, 0, 0), sample_key(0, 1, 0));
    }
}
