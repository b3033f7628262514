//! PSNR, SSIM, worst-digit variants and the per-image score bundle.

use serde::{Deserialize, Serialize};

use crate::degradation::{convolve_planar, gaussian_kernel};
use crate::error::{Error, Result};
use crate::image::{Image, Rect};
use crate::ocr::read_plate;
use crate::plate::{CleanPlate, DIGIT_COUNT};

/// Value written to files in place of an infinite PSNR.
pub const PSNR_INFINITY_SENTINEL: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Caps infinite PSNR at the file sentinel.
pub fn psnr_for_file(v: f64) -> f64 {
    if v.is_finite() {
        v.min(PSNR_INFINITY_SENTINEL)
    } else {
        PSNR_INFINITY_SENTINEL
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    let sum: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    Ok(sum as f64 / a.data().len() as f64)
}

/// `10·log10(MAX² / MSE)` over all samples; `+∞` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    psnr_with_max(a, b, 255.0)
}

pub fn psnr_with_max(a: &Image, b: &Image, max_value: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / m).log10())
}

fn filter_gaussian(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    convolve_planar(plane, w, h, 1, k)
}

fn window_kernel() -> Vec<f64> {
    let k = gaussian_kernel(SSIM_SIGMA);
    // ceil(3·1.5) = 5 → 11 taps
    debug_assert_eq!(k.len(), SSIM_WINDOW);
    k
}

/// Mean structural similarity on the BT.601 gray versions of `a` and `b`, using an
/// 11×11 Gaussian window (σ = 1.5) centred on every pixel with clamp-to-edge borders.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", a.width(), a.height()),
            right: format!("{}x{}", b.width(), b.height()),
        });
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidImage(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let ga: Vec<f64> = a.to_grayscale().data().iter().map(|&v| v as f64).collect();
    let gb: Vec<f64> = b.to_grayscale().data().iter().map(|&v| v as f64).collect();
    let k = window_kernel();
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_gaussian(&ga, w, h, &k);
    let mu_b = filter_gaussian(&gb, w, h, &k);
    let aa = filter_gaussian(&prod(&ga, &ga), w, h, &k);
    let bb = filter_gaussian(&prod(&gb, &gb), w, h, &k);
    let ab = filter_gaussian(&prod(&ga, &gb), w, h, &k);
    let mut total = 0.0;
    for i in 0..w * h {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
        total += num / den;
    }
    Ok(total / (w * h) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Ssim,
}

impl Metric {
    pub fn eval(&self, a: &Image, b: &Image) -> Result<f64> {
        match self {
            Metric::Psnr => psnr(a, b),
            Metric::Ssim => ssim(a, b),
        }
    }
}

/// Minimum of `metric` over the per-box crops.
pub fn worst_digit(a: &Image, b: &Image, boxes: &[Rect], metric: Metric) -> Result<f64> {
    if boxes.len() != DIGIT_COUNT {
        return Err(Error::OutOfRange(format!(
            "expected {DIGIT_COUNT} digit boxes, got {}",
            boxes.len()
        )));
    }
    a.same_shape(b)?;
    let mut worst = f64::INFINITY;
    for r in boxes {
        let v = metric.eval(&a.crop(*r)?, &b.crop(*r)?)?;
        worst = worst.min(v);
    }
    Ok(worst)
}

/// The six per-image measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub psnr_plate: f64,
    pub ssim_plate: f64,
    pub psnr_worst_digit: f64,
    pub ssim_worst_digit: f64,
    pub ocr_digit_acc: f64,
    pub ocr_plate_ok: bool,
}

/// Scores a restored 256×64 image against its ground truth.
pub fn score(restored: &Image, truth: &CleanPlate) -> Result<QualityScores> {
    restored.same_shape(&truth.image)?;
    let ocr = read_plate(restored)?;
    let correct = ocr
        .digits
        .bytes()
        .zip(truth.digits.bytes())
        .filter(|(a, b)| a == b)
        .count();
    Ok(QualityScores {
        psnr_plate: psnr(restored, &truth.image)?,
        ssim_plate: ssim(restored, &truth.image)?,
        psnr_worst_digit: worst_digit(restored, &truth.image, &truth.boxes, Metric::Psnr)?,
        ssim_worst_digit: worst_digit(restored, &truth.image, &truth.boxes, Metric::Ssim)?,
        ocr_digit_acc: correct as f64 / DIGIT_COUNT as f64,
        ocr_plate_ok: correct == DIGIT_COUNT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Rgb;
    use crate::plate::render_plate;

    #[test]
    fn psnr_reference_values() {
        let a = Image::filled(8, 8, Rgb::gray(10));
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(psnr_for_file(f64::INFINITY), 99.0);
        let b = Image::filled(8, 8, Rgb::gray(11));
        let expected = 10.0 * (255.0f64 * 255.0).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 48.13).abs() < 0.005);
        let black = Image::filled(4, 4, Rgb::gray(0));
        let white = Image::filled(4, 4, Rgb::gray(255));
        assert_eq!(psnr(&black, &white).unwrap(), 0.0);
    }

    #[test]
    fn psnr_dimension_mismatch() {
        let a = Image::filled(8, 8, Rgb::gray(0));
        let b = Image::filled(8, 7, Rgb::gray(0));
        assert!(matches!(psnr(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let a = render_plate("123456").unwrap().image;
        let b = render_plate("654321").unwrap().image;
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let (ab, ba) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab < 1.0 && ab > -1.0);
    }

    #[test]
    fn ssim_constant_images() {
        let a = Image::filled(16, 16, Rgb::gray(100));
        let b = Image::filled(16, 16, Rgb::gray(110));
        let expected = (2.0 * 100.0 * 110.0 + SSIM_C1) / (100.0f64.powi(2) + 110.0f64.powi(2) + SSIM_C1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn ssim_too_small() {
        let a = Image::filled(10, 30, Rgb::gray(0));
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn worst_digit_localises_damage() {
        let truth = render_plate("908172").unwrap();
        let mut damaged = truth.image.clone();
        let b = truth.boxes[3];
        for y in b.y..b.bottom() {
            for x in b.x..b.right() {
                let p = damaged.pixel_mut(x, y);
                p[0] = p[0].wrapping_add(((x * 7 + y * 3) % 40) as u8);
            }
        }
        for metric in [Metric::Psnr, Metric::Ssim] {
            let per: Vec<f64> = truth
                .boxes
                .iter()
                .map(|r| {
                    metric
                        .eval(&damaged.crop(*r).unwrap(), &truth.image.crop(*r).unwrap())
                        .unwrap()
                })
                .collect();
            let worst = worst_digit(&damaged, &truth.image, &truth.boxes, metric).unwrap();
            assert_eq!(worst, per[3]);
            assert!(worst <= per.iter().cloned().fold(f64::MIN, f64::max));
        }
        assert_eq!(
            worst_digit(&truth.image, &truth.image, &truth.boxes, Metric::Psnr).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            worst_digit(&truth.image, &truth.image, &truth.boxes, Metric::Ssim).unwrap(),
            1.0
        );
    }

    #[test]
    fn score_of_truth_is_perfect() {
        let truth = render_plate("550912").unwrap();
        let s = score(&truth.image, &truth).unwrap();
        assert_eq!(s.psnr_plate, f64::INFINITY);
        assert_eq!(s.ssim_plate, 1.0);
        assert!(s.ocr_plate_ok);
        assert_eq!(s.ocr_digit_acc, 1.0);
    }

    #[test]
    fn one_wrong_digit() {
        let truth = render_plate("550912").unwrap();
        let shown = render_plate("550913").unwrap();
        let s = score(&shown.image, &truth).unwrap();
        assert!((s.ocr_digit_acc - 5.0 / 6.0).abs() < 1e-12);
        assert!(!s.ocr_plate_ok);
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let a = render_plate("314159").unwrap().image;
        let mut prev = f64::INFINITY;
        for amp in 1..20u8 {
            let mut b = a.clone();
            for (i, v) in b.data_mut().iter_mut().enumerate() {
                *v = if i % 2 == 0 { v.saturating_add(amp) } else { v.saturating_sub(amp) };
            }
            let p = psnr(&a, &b).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }
}
