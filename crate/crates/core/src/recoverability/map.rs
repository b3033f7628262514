use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square boolean field indexed by integer `(alpha, beta)` in `[0, n−1]²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolGrid {
    n: usize,
    cells: Vec<bool>,
}

impl BoolGrid {
    pub fn new(n: usize, value: bool) -> Self {
        BoolGrid {
            n,
            cells: vec![value; n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut g = BoolGrid::new(n, false);
        for a in 0..n {
            for b in 0..n {
                g.set(a, b, f(a, b));
            }
        }
        g
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, alpha: usize, beta: usize) -> bool {
        self.cells[alpha * self.n + beta]
    }

    pub fn set(&mut self, alpha: usize, beta: usize, v: bool) {
        self.cells[alpha * self.n + beta] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Rows indexed by alpha, each a string of `0`/`1` over beta.
    pub fn to_rows(&self) -> Vec<String> {
        self.cells
            .chunks(self.n.max(1))
            .take(self.n)
            .map(|row| row.iter().map(|&c| if c { '1' } else { '0' }).collect())
            .collect()
    }

    pub fn from_rows(rows: &[String]) -> Result<Self> {
        let n = rows.len();
        let mut g = BoolGrid::new(n, false);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Format(format!(
                    "grid row {a} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (b, ch) in row.bytes().enumerate() {
                match ch {
                    b'0' => {}
                    b'1' => g.set(a, b, true),
                    other => {
                        return Err(Error::Format(format!(
                            "grid row {a} holds {:?}; only 0 and 1 are allowed",
                            other as char
                        )))
                    }
                }
            }
        }
        Ok(g)
    }

    /// Elementwise OR.
    pub fn union(&self, other: &BoolGrid) -> Result<BoolGrid> {
        if self.n != other.n {
            return Err(Error::MapMismatch(format!("grid sizes {} and {}", self.n, other.n)));
        }
        Ok(BoolGrid {
            n: self.n,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| *a || *b).collect(),
        })
    }
}

/// Per-alpha maximum recoverable beta and per-beta maximum recoverable alpha, −1 when
/// the slice has no recoverable cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelopes {
    pub beta_max: Vec<i32>,
    pub alpha_max: Vec<i32>,
}

pub fn envelopes(grid: &BoolGrid) -> Envelopes {
    let n = grid.size();
    let mut beta_max = vec![-1; n];
    let mut alpha_max = vec![-1; n];
    for a in 0..n {
        for b in 0..n {
            if grid.get(a, b) {
                beta_max[a] = beta_max[a].max(b as i32);
                alpha_max[b] = alpha_max[b].max(a as i32);
            }
        }
    }
    Envelopes { beta_max, alpha_max }
}

fn trapezoid(samples: &[i32]) -> f64 {
    samples
        .windows(2)
        .map(|w| (w[0].max(0) + w[1].max(0)) as f64 / 2.0)
        .sum()
}

/// Enclosed area of both envelopes, trapezoid rule on unit spacing, normalised by the
/// full `(n−1)²` grid area. Empty slices count as 0.
pub fn boundary_auc(env: &Envelopes) -> f64 {
    let n = env.beta_max.len();
    if n < 2 {
        return 0.0;
    }
    let span = (n - 1) as f64;
    (trapezoid(&env.beta_max) + trapezoid(&env.alpha_max)) / (2.0 * span * span)
}

/// Un-normalised enclosed area `auc · (n−1)²`.
pub fn enclosed_area(auc: f64, n: usize) -> f64 {
    let span = n.saturating_sub(1) as f64;
    auc * span * span
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorFailure {
    pub alpha: usize,
    pub beta: usize,
    /// Euclidean distance to the nearest boundary point.
    pub distance: f64,
}

/// Non-recoverable cells inside both envelopes.
pub fn interior_failure_cells(grid: &BoolGrid, env: &Envelopes) -> Vec<(usize, usize)> {
    let n = grid.size();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if !grid.get(a, b) && b as i32 <= env.beta_max[a] && a as i32 <= env.alpha_max[b] {
                out.push((a, b));
            }
        }
    }
    out
}

/// Boundary point set: `(α, beta_max(α))` and `(alpha_max(β), β)` for non-empty slices.
pub fn boundary_points(env: &Envelopes) -> Vec<(usize, usize)> {
    let mut pts = Vec::new();
    for (a, &b) in env.beta_max.iter().enumerate() {
        if b >= 0 {
            pts.push((a, b as usize));
        }
    }
    for (b, &a) in env.alpha_max.iter().enumerate() {
        if a >= 0 {
            pts.push((a as usize, b));
        }
    }
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// One-dimensional squared distance transform of a sampled function (lower envelope of
/// parabolas).
fn dt1(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let mut any = false;
    let meet = |p: usize, q: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64)
    };
    for q in (0..n).filter(|&q| f[q].is_finite()) {
        if !any {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            any = true;
            continue;
        }
        let mut s = meet(v[k], q);
        while s <= z[k] {
            k -= 1;
            s = meet(v[k], q);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if !any {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut j = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let d = q as f64 - v[j] as f64;
        *o = d * d + f[v[j]];
    }
}

/// Exact squared Euclidean distance from every lattice cell to the nearest seed.
fn squared_distance_field(n: usize, seeds: &[(usize, usize)]) -> Vec<f64> {
    let mut field = vec![f64::INFINITY; n * n];
    for &(a, b) in seeds {
        field[a * n + b] = 0.0;
    }
    let mut tmp = vec![0.0; n];
    let mut col = vec![0.0; n];
    // along beta
    for a in 0..n {
        dt1(&field[a * n..(a + 1) * n], &mut tmp);
        field[a * n..(a + 1) * n].copy_from_slice(&tmp);
    }
    // along alpha
    for b in 0..n {
        for a in 0..n {
            col[a] = field[a * n + b];
        }
        dt1(&col, &mut tmp);
        for a in 0..n {
            field[a * n + b] = tmp[a];
        }
    }
    field
}

/// `sqrt(Σ d² / E)`.
pub fn reliability_score(squared_distances: &[f64], enclosed_area: f64) -> Result<f64> {
    if squared_distances.is_empty() {
        return Ok(0.0);
    }
    if enclosed_area <= 0.0 {
        return Err(Error::ZeroArea(squared_distances.len()));
    }
    Ok((squared_distances.iter().sum::<f64>() / enclosed_area).sqrt())
}

/// Reliability score F and the interior failures with their boundary distances.
pub fn reliability(grid: &BoolGrid, env: &Envelopes, auc: f64) -> Result<(f64, Vec<InteriorFailure>)> {
    let n = grid.size();
    let cells = interior_failure_cells(grid, env);
    if cells.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let field = squared_distance_field(n, &boundary_points(env));
    let sq: Vec<f64> = cells.iter().map(|&(a, b)| field[a * n + b]).collect();
    let f = reliability_score(&sq, enclosed_area(auc, n))?;
    let failures = cells
        .iter()
        .zip(&sq)
        .map(|(&(alpha, beta), &d2)| InteriorFailure {
            alpha,
            beta,
            distance: d2.sqrt(),
        })
        .collect();
    Ok((f, failures))
}

/// Which per-cell OCR rate is thresholded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndicatorChannel {
    /// Fraction of images whose six digits are all correct.
    #[default]
    Plate,
    /// Mean fraction of correct digits.
    Digit,
}

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const RECMAP_FORMAT_VERSION: &str = "1.0";

/// A thresholded recoverability map with its envelope analytics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecMap {
    pub format_version: String,
    pub threshold: f64,
    #[serde(default)]
    pub channel: IndicatorChannel,
    pub size: usize,
    /// Rows indexed by alpha; character `b` of a row is the cell at beta = b.
    pub grid: Vec<String>,
    pub beta_max: Vec<i32>,
    pub alpha_max: Vec<i32>,
    pub auc: f64,
    pub f_score: f64,
    pub interior_failures: Vec<InteriorFailure>,
    #[serde(default)]
    pub failed_cells: usize,
}

impl RecMap {
    pub fn from_grid(grid: &BoolGrid, threshold: f64, channel: IndicatorChannel, failed_cells: usize) -> Result<RecMap> {
        if grid.size() < 2 {
            return Err(Error::OutOfRange(format!("grid size {} is below 2", grid.size())));
        }
        let env = envelopes(grid);
        let auc = boundary_auc(&env);
        let (f_score, interior_failures) = reliability(grid, &env, auc)?;
        Ok(RecMap {
            format_version: RECMAP_FORMAT_VERSION.to_string(),
            threshold,
            channel,
            size: grid.size(),
            grid: grid.to_rows(),
            beta_max: env.beta_max,
            alpha_max: env.alpha_max,
            auc,
            f_score,
            interior_failures,
            failed_cells,
        })
    }

    pub fn bool_grid(&self) -> Result<BoolGrid> {
        let g = BoolGrid::from_rows(&self.grid)?;
        if g.size() != self.size {
            return Err(Error::Format(format!(
                "map declares size {} but holds {} rows",
                self.size,
                g.size()
            )));
        }
        Ok(g)
    }

    pub fn envelopes(&self) -> Envelopes {
        Envelopes {
            beta_max: self.beta_max.clone(),
            alpha_max: self.alpha_max.clone(),
        }
    }
}

/// Pointwise maximum (logical OR) of maps sharing threshold, channel and size.
pub fn max_map(maps: &[RecMap]) -> Result<RecMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::MapMismatch("no maps to merge".into()))?;
    let mut grid = first.bool_grid()?;
    for m in &maps[1..] {
        if m.threshold != first.threshold {
            return Err(Error::MapMismatch(format!(
                "thresholds {} and {}",
                first.threshold, m.threshold
            )));
        }
        if m.channel != first.channel {
            return Err(Error::MapMismatch(format!(
                "channels {:?} and {:?}",
                first.channel, m.channel
            )));
        }
        grid = grid.union(&m.bool_grid()?)?;
    }
    let failed = maps.iter().map(|m| m.failed_cells).max().unwrap_or(0);
    RecMap::from_grid(&grid, first.threshold, first.channel, failed)
}
