use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BITS: usize = 32;
pub const MAX_INDEX: u64 = 1 << 31;

/// Direction numbers `v_k = m_k · 2^(32-k)` for the first two Sobol dimensions.
///
/// Dimension 1 is van der Corput (`m_k = 1`). Dimension 2 uses the primitive
/// polynomial `x + 1` (degree 1, no interior coefficients) with `m_1 = 1`, which gives
/// the recurrence `m_k = 2·m_{k-1} XOR m_{k-1}`.
fn direction_numbers() -> [[u32; BITS]; 2] {
    let mut v = [[0u32; BITS]; 2];
    let mut m: u64 = 1;
    for k in 0..BITS {
        v[0][k] = 1u32 << (BITS - 1 - k);
        if k > 0 {
            m ^= m << 1;
        }
        v[1][k] = (m << (BITS - 1 - k)) as u32;
    }
    v
}

/// Two-dimensional Sobol stream with optional digital-shift scrambling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SobolStream {
    index: u64,
    scramble_seed: u64,
    #[serde(skip, default = "direction_numbers")]
    directions: [[u32; BITS]; 2],
    #[serde(skip)]
    shift: [u32; 2],
}

impl SobolStream {
    /// Unscrambled stream starting at index 0.
    pub fn new() -> Self {
        Self::scrambled(0)
    }

    /// Stream whose points are XOR-shifted by a bit vector derived from `seed`; a seed of
    /// 0 means no scrambling.
    pub fn scrambled(seed: u64) -> Self {
        let shift = if seed == 0 {
            [0, 0]
        } else {
            use rand::Rng;
            let mut rng = crate::rng::keyed(seed, crate::rng::domain::DATASET_SCRAMBLE, 0);
            [rng.random(), rng.random()]
        };
        SobolStream {
            index: 0,
            scramble_seed: seed,
            directions: direction_numbers(),
            shift,
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn scramble_seed(&self) -> u64 {
        self.scramble_seed
    }

    /// The `index`-th point (Gray-code order), independent of stream state.
    pub fn point(&self, index: u64) -> Result<[f64; 2]> {
        if index >= MAX_INDEX {
            return Err(Error::StreamExhausted(index));
        }
        let gray = index ^ (index >> 1);
        let mut x = self.shift;
        for bit in 0..BITS {
            if gray >> bit & 1 == 1 {
                x[0] ^= self.directions[0][bit];
                x[1] ^= self.directions[1][bit];
            }
        }
        let scale = 1.0 / (1u64 << BITS) as f64;
        Ok([x[0] as f64 * scale, x[1] as f64 * scale])
    }

    /// Returns the current point and advances the counter.
    pub fn next_point(&mut self) -> Result<[f64; 2]> {
        let p = self.point(self.index)?;
        self.index += 1;
        Ok(p)
    }
}

impl Default for SobolStream {
    fn default() -> Self {
        Self::new()
    }
}

/// Largest deviation from one-point-per-box over the `2^(k/2) × 2^(k/2)` dyadic grid, for
/// the given points.
pub fn square_box_deviation(points: &[[f64; 2]], cells_per_axis: usize) -> usize {
    let mut counts = vec![0usize; cells_per_axis * cells_per_axis];
    for p in points {
        let i = ((p[0] * cells_per_axis as f64) as usize).min(cells_per_axis - 1);
        let j = ((p[1] * cells_per_axis as f64) as usize).min(cells_per_axis - 1);
        counts[j * cells_per_axis + i] += 1;
    }
    let expected = points.len() / (cells_per_axis * cells_per_axis);
    counts
        .iter()
        .map(|&c| c.abs_diff(expected))
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every elementary box of volume 2^-k (all 2^a × 2^(k-a) shapes) holds exactly one of
    /// the first 2^k points.
    fn is_02_net(points: &[[f64; 2]], k: u32) -> bool {
        (0..=k).all(|a| {
            let (nx, ny) = (1usize << a, 1usize << (k - a));
            let mut counts = vec![0; nx * ny];
            for p in points {
                let i = (p[0] * nx as f64) as usize;
                let j = (p[1] * ny as f64) as usize;
                counts[j * nx + i] += 1;
            }
            counts.iter().all(|&c| c == 1)
        })
    }

    #[test]
    fn first_points_match_reference() {
        let s = SobolStream::new();
        assert_eq!(s.point(0).unwrap(), [0.0, 0.0]);
        assert_eq!(s.point(1).unwrap(), [0.5, 0.5]);
        assert_eq!(s.point(2).unwrap(), [0.75, 0.25]);
        assert_eq!(s.point(3).unwrap(), [0.25, 0.75]);
        // next Gray-code points of the Joe–Kuo generator
        assert_eq!(s.point(4).unwrap(), [0.375, 0.375]);
        assert_eq!(s.point(5).unwrap(), [0.875, 0.875]);
        assert_eq!(s.point(6).unwrap(), [0.625, 0.125]);
        assert_eq!(s.point(7).unwrap(), [0.125, 0.625]);
    }

    #[test]
    fn unscrambled_prefixes_are_02_nets() {
        let s = SobolStream::new();
        for k in 0..=10 {
            let pts: Vec<_> = (0..1u64 << k).map(|i| s.point(i).unwrap()).collect();
            assert!(is_02_net(&pts, k), "k = {k}");
        }
    }

    #[test]
    fn scrambled_prefixes_stay_stratified() {
        let s = SobolStream::scrambled(0xDEADBEEF);
        let pts: Vec<_> = (0..1024).map(|i| s.point(i).unwrap()).collect();
        assert!(is_02_net(&pts, 10));
        assert_ne!(pts[1], SobolStream::new().point(1).unwrap());
    }

    #[test]
    fn replay_is_identical() {
        let mut a = SobolStream::scrambled(42);
        let mut b = SobolStream::scrambled(42);
        for _ in 0..100 {
            assert_eq!(a.next_point().unwrap(), b.next_point().unwrap());
        }
        assert_eq!(a.index(), 100);
    }

    #[test]
    fn exhaustion() {
        let s = SobolStream::new();
        assert!(s.point(MAX_INDEX - 1).is_ok());
        assert!(matches!(s.point(MAX_INDEX), Err(Error::StreamExhausted(_))));
    }

    #[test]
    fn points_in_unit_square() {
        let s = SobolStream::scrambled(7);
        for i in (0..MAX_INDEX).step_by(1 << 20) {
            let p = s.point(i).unwrap();
            assert!((0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1]));
        }
    }
}
