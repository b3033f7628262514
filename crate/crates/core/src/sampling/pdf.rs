use serde::{Deserialize, Serialize};

use crate::geometry::MAX_ANGLE_DEG;

/// Table resolution of the inverse CDF, in degrees.
const RESOLUTION_DEG: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Standard,
    Extreme,
}

/// Angle density `p(θ) ∝ 1 + c·exp((θ - 89) / s)` on `[0, 89]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePdfVariant {
    pub name: VariantName,
    /// Tail weight `c`.
    pub emphasis_c: f64,
    /// Tail scale `s` in degrees.
    pub emphasis_s: f64,
}

impl AnglePdfVariant {
    pub const STANDARD: AnglePdfVariant = AnglePdfVariant {
        name: VariantName::Standard,
        emphasis_c: 2.0,
        emphasis_s: 15.0,
    };
    pub const EXTREME: AnglePdfVariant = AnglePdfVariant {
        name: VariantName::Extreme,
        emphasis_c: 8.0,
        emphasis_s: 10.0,
    };

    pub fn by_name(name: VariantName) -> Self {
        match name {
            VariantName::Standard => Self::STANDARD,
            VariantName::Extreme => Self::EXTREME,
        }
    }

    /// Unnormalised density.
    pub fn density(&self, theta: f64) -> f64 {
        1.0 + self.emphasis_c * ((theta - MAX_ANGLE_DEG) / self.emphasis_s).exp()
    }

    /// Unnormalised CDF, `∫_0^θ p`.
    fn raw_cdf(&self, theta: f64) -> f64 {
        let (c, s) = (self.emphasis_c, self.emphasis_s);
        theta + c * s * (((theta - MAX_ANGLE_DEG) / s).exp() - (-MAX_ANGLE_DEG / s).exp())
    }

    /// CDF sampled on the 0.1° grid, normalised to end at 1.
    pub fn cdf_table(&self) -> Vec<f64> {
        let n = (MAX_ANGLE_DEG / RESOLUTION_DEG).round() as usize;
        let total = self.raw_cdf(MAX_ANGLE_DEG);
        let mut t: Vec<f64> = (0..=n)
            .map(|k| self.raw_cdf(k as f64 * RESOLUTION_DEG) / total)
            .collect();
        t[0] = 0.0;
        t[n] = 1.0;
        t
    }

    /// Inverse-CDF transform of `u ∈ [0, 1]` to an angle in `[0, 89]`.
    pub fn angle_from_uniform(&self, u: f64) -> f64 {
        AngleSampler::new(*self).angle(u)
    }
}

/// Inverse-CDF lookup with the table precomputed.
#[derive(Debug, Clone)]
pub struct AngleSampler {
    variant: AnglePdfVariant,
    cdf: Vec<f64>,
}

impl AngleSampler {
    pub fn new(variant: AnglePdfVariant) -> Self {
        AngleSampler {
            variant,
            cdf: variant.cdf_table(),
        }
    }

    pub fn variant(&self) -> &AnglePdfVariant {
        &self.variant
    }

    pub fn angle(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let n = self.cdf.len() - 1;
        if u >= 1.0 {
            return MAX_ANGLE_DEG;
        }
        // first k with cdf[k+1] > u
        let k = self.cdf.partition_point(|&c| c <= u).saturating_sub(1).min(n - 1);
        let (c0, c1) = (self.cdf[k], self.cdf[k + 1]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        ((k as f64 + t) * RESOLUTION_DEG).min(MAX_ANGLE_DEG)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SobolStream;

    /// Mean and upper-tail mass of the density by midpoint quadrature.
    fn quadrature(v: &AnglePdfVariant) -> (f64, f64) {
        let n = 89_000;
        let h = MAX_ANGLE_DEG / n as f64;
        let (mut z, mut m, mut tail) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            let p = v.density(t) * h;
            z += p;
            m += t * p;
            if t > 70.0 {
                tail += p;
            }
        }
        (m / z, tail / z)
    }

    #[test]
    fn endpoints() {
        for v in [AnglePdfVariant::STANDARD, AnglePdfVariant::EXTREME] {
            assert_eq!(v.angle_from_uniform(0.0), 0.0);
            assert_eq!(v.angle_from_uniform(1.0), 89.0);
        }
    }

    #[test]
    fn inverse_cdf_hits_the_table() {
        let v = AnglePdfVariant::STANDARD;
        let s = AngleSampler::new(v);
        for k in [1usize, 100, 450, 889] {
            let theta = s.angle(s.cdf[k]);
            assert!((theta - k as f64 * 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_in_u() {
        let s = AngleSampler::new(AnglePdfVariant::EXTREME);
        let mut prev = -1.0;
        for i in 0..=20_000 {
            let a = s.angle(i as f64 / 20_000.0);
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn emphasis_on_large_angles() {
        let sobol = SobolStream::new();
        let std = AngleSampler::new(AnglePdfVariant::STANDARD);
        let ext = AngleSampler::new(AnglePdfVariant::EXTREME);
        let n = 10_000;
        let (mut mean, mut tail_std, mut tail_ext) = (0.0, 0, 0);
        for i in 0..n {
            let u = sobol.point(i).unwrap()[0];
            let a = std.angle(u);
            mean += a / n as f64;
            tail_std += (a > 70.0) as usize;
            tail_ext += (ext.angle(u) > 70.0) as usize;
        }
        assert!(mean > 44.5, "mean {mean}");
        assert!(tail_ext > tail_std);

        let (qmean, qtail_std) = quadrature(&AnglePdfVariant::STANDARD);
        let (_, qtail_ext) = quadrature(&AnglePdfVariant::EXTREME);
        assert!((mean - qmean).abs() < 0.05, "{mean} vs {qmean}");
        assert!((tail_std as f64 / n as f64 - qtail_std).abs() < 0.005);
        assert!((tail_ext as f64 / n as f64 - qtail_ext).abs() < 0.005);
    }
}
