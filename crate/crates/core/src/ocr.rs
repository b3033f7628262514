//! Slot-aligned template OCR.
//!
//! Each restored plate is converted to gray, contrast-stretched, upscaled 2× and
//! binarised. Every digit slot is compared against the ten glyph templates by normalised
//! cross-correlation. When the winning margin on the primary binarisation is below
//! [`FALLBACK_MARGIN`], the slot is re-read from the Otsu, adaptive and inverted
//! binarisations and the decision with the best margin is kept.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::plate::{glyph, slot_box, DIGIT_COUNT, GLYPH_HEIGHT, GLYPH_WIDTH, PLATE_HEIGHT, PLATE_WIDTH};

pub const UPSCALE: usize = 2;
pub const FALLBACK_MARGIN: f64 = 0.05;
pub const ADAPTIVE_WINDOW: usize = 15;
pub const ADAPTIVE_OFFSET: f64 = -5.0;

const SLOT_W: usize = GLYPH_WIDTH * UPSCALE;
const SLOT_H: usize = GLYPH_HEIGHT * UPSCALE;
const SLOT_PIXELS: usize = SLOT_W * SLOT_H;
const WORDS: usize = SLOT_PIXELS.div_ceil(64);

/// Binarisation strategy, in fallback order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Primary,
    Otsu,
    Adaptive,
    Inverted,
}

impl Strategy {
    pub const ORDER: [Strategy; 4] = [
        Strategy::Primary,
        Strategy::Otsu,
        Strategy::Adaptive,
        Strategy::Inverted,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrResult {
    pub digits: String,
    /// Correlation of the chosen template, per slot.
    pub per_digit_confidence: [f64; DIGIT_COUNT],
    /// Best minus second-best correlation, per slot.
    pub margins: [f64; DIGIT_COUNT],
    pub strategy_used: [Strategy; DIGIT_COUNT],
}

/// A binarised candidate: 0 = ink, 255 = paper.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub strategy: Strategy,
    pub image: Image,
}

/// Gray, stretched and 2×-upscaled plate shared by all binarisations.
struct Prepared {
    gray: Image,
}

impl Prepared {
    fn new(img: &Image) -> Self {
        let gray = stretch(&img.to_grayscale());
        Prepared {
            gray: upscale_bilinear(&gray, UPSCALE),
        }
    }

    fn mean(&self) -> f64 {
        let d = self.gray.data();
        d.iter().map(|&v| v as u64).sum::<u64>() as f64 / d.len() as f64
    }

    /// Ink mask for `strategy` (true = ink).
    fn ink(&self, strategy: Strategy) -> Vec<bool> {
        let d = self.gray.data();
        match strategy {
            Strategy::Primary => {
                let t = self.mean();
                d.iter().map(|&v| (v as f64) < t).collect()
            }
            Strategy::Inverted => {
                let t = self.mean();
                d.iter().map(|&v| (v as f64) > t).collect()
            }
            Strategy::Otsu => {
                let t = otsu_threshold(&self.gray);
                d.iter().map(|&v| v <= t).collect()
            }
            Strategy::Adaptive => {
                let local = box_mean(&self.gray, ADAPTIVE_WINDOW);
                d.iter()
                    .zip(&local)
                    .map(|(&v, &m)| (v as f64) <= m + ADAPTIVE_OFFSET)
                    .collect()
            }
        }
    }
}

fn stretch(gray: &Image) -> Image {
    let d = gray.data();
    let (lo, hi) = d
        .iter()
        .fold((u8::MAX, u8::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi <= lo {
        return gray.clone();
    }
    let span = (hi - lo) as f64;
    let data = d
        .iter()
        .map(|&v| ((v - lo) as f64 * 255.0 / span).round() as u8)
        .collect();
    Image::from_raw(gray.width(), gray.height(), 1, data).expect("same dimensions")
}

fn upscale_bilinear(img: &Image, factor: usize) -> Image {
    let (w, h) = (img.width(), img.height());
    let (ow, oh) = (w * factor, h * factor);
    let f = factor as f64;
    let mut data = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        let sy = ((y as f64 + 0.5) / f - 0.5).max(0.0);
        let y0 = (sy.floor() as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let ty = sy - y0 as f64;
        for x in 0..ow {
            let sx = ((x as f64 + 0.5) / f - 0.5).max(0.0);
            let x0 = (sx.floor() as usize).min(w - 1);
            let x1 = (x0 + 1).min(w - 1);
            let tx = sx - x0 as f64;
            let p = |xx, yy| img.pixel(xx, yy)[0] as f64;
            let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * tx;
            let bot = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * tx;
            data.push(crate::image::clamp_u8(top + (bot - top) * ty));
        }
    }
    Image::from_raw(ow, oh, img.channels(), data).expect("upscaled dimensions are valid")
}

/// Otsu's threshold: the gray level `t` maximising between-class variance of
/// `{v ≤ t}` and `{v > t}`. Ties resolve to the midpoint of the maximising run.
pub fn otsu_threshold(gray: &Image) -> u8 {
    let mut hist = [0u64; 256];
    for &v in gray.data() {
        hist[v as usize] += 1;
    }
    let total = gray.data().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = -1.0;
    let (mut first, mut last) = (0usize, 0usize);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best * (1.0 + 1e-12) {
            best = between;
            first = t;
            last = t;
        } else if (between - best).abs() <= best * 1e-12 {
            last = t;
        }
    }
    if best < 0.0 {
        return gray.data().first().copied().unwrap_or(0);
    }
    ((first + last) / 2) as u8
}

/// Mean over a `window × window` neighbourhood, truncated at the borders.
fn box_mean(gray: &Image, window: usize) -> Vec<f64> {
    let (w, h) = (gray.width(), gray.height());
    let mut integral = vec![0u64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            row += gray.pixel(x, y)[0] as u64;
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let r = window / 2;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let s = integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
                - integral[y0 * (w + 1) + x1]
                - integral[y1 * (w + 1) + x0];
            out.push(s as f64 / ((x1 - x0) * (y1 - y0)) as f64);
        }
    }
    out
}

fn mask_image(width: usize, height: usize, ink: &[bool]) -> Image {
    let data = ink.iter().map(|&i| if i { 0 } else { 255 }).collect();
    Image::from_raw(width, height, 1, data).expect("mask dimensions are valid")
}

fn check_plate_size(img: &Image) -> Result<()> {
    if img.width() != PLATE_WIDTH || img.height() != PLATE_HEIGHT {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", img.width(), img.height()),
            right: format!("{PLATE_WIDTH}x{PLATE_HEIGHT}"),
        });
    }
    Ok(())
}

/// The four binarised candidates in fallback order, each 512×128 with ink = 0.
pub fn preprocess_for_ocr(img: &Image) -> Result<Vec<Candidate>> {
    check_plate_size(img)?;
    let prepared = Prepared::new(img);
    let (w, h) = (prepared.gray.width(), prepared.gray.height());
    Ok(Strategy::ORDER
        .iter()
        .map(|&s| Candidate {
            strategy: s,
            image: mask_image(w, h, &prepared.ink(s)),
        })
        .collect())
}

/// Fixed-size bitset over one upscaled slot.
#[derive(Clone)]
struct SlotBits {
    words: [u64; WORDS],
    ones: u32,
}

impl SlotBits {
    fn from_fn(f: impl Fn(usize, usize) -> bool) -> Self {
        let mut words = [0u64; WORDS];
        for y in 0..SLOT_H {
            for x in 0..SLOT_W {
                if f(x, y) {
                    let i = y * SLOT_W + x;
                    words[i / 64] |= 1 << (i % 64);
                }
            }
        }
        let ones = words.iter().map(|w| w.count_ones()).sum();
        SlotBits { words, ones }
    }

    /// Pearson correlation of two binary patterns.
    fn ncc(&self, other: &SlotBits) -> f64 {
        let n = SLOT_PIXELS as f64;
        let both: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        let (a, b) = (self.ones as f64, other.ones as f64);
        let var = (a - a * a / n) * (b - b * b / n);
        if var <= 0.0 {
            return 0.0;
        }
        (both as f64 - a * b / n) / var.sqrt()
    }
}

fn templates() -> &'static [SlotBits; 10] {
    static T: OnceLock<[SlotBits; 10]> = OnceLock::new();
    T.get_or_init(|| {
        std::array::from_fn(|d| {
            let g = glyph(d as u8);
            SlotBits::from_fn(|x, y| g.ink(x / UPSCALE, y / UPSCALE))
        })
    })
}

/// Correlation of a binary slot pattern against each digit template.
fn classify(slot: &SlotBits) -> (u8, f64, f64) {
    let scores: Vec<f64> = templates().iter().map(|t| slot.ncc(t)).collect();
    let mut best = 0;
    for d in 1..10 {
        if scores[d] > scores[best] {
            best = d;
        }
    }
    let second = (0..10)
        .filter(|&d| d != best)
        .map(|d| scores[d])
        .fold(f64::NEG_INFINITY, f64::max);
    (best as u8, scores[best], scores[best] - second)
}

/// Reads the six digits of a 256×64 plate image.
pub fn read_plate(img: &Image) -> Result<OcrResult> {
    check_plate_size(img)?;
    let prepared = Prepared::new(img);
    let width = prepared.gray.width();
    let mut masks: [Option<Vec<bool>>; 4] = Default::default();

    let mut digits = String::with_capacity(DIGIT_COUNT);
    let mut confidence = [0.0; DIGIT_COUNT];
    let mut margins = [0.0; DIGIT_COUNT];
    let mut strategies = [Strategy::Primary; DIGIT_COUNT];
    for slot in 0..DIGIT_COUNT {
        let b = slot_box(slot);
        let (ox, oy) = (b.x * UPSCALE, b.y * UPSCALE);
        let mut chosen: Option<(u8, f64, f64, Strategy)> = None;
        for (k, &strategy) in Strategy::ORDER.iter().enumerate() {
            let mask = masks[k].get_or_insert_with(|| prepared.ink(strategy));
            let bits = SlotBits::from_fn(|x, y| mask[(oy + y) * width + ox + x]);
            let (d, score, margin) = classify(&bits);
            if chosen.is_none_or(|c| margin > c.2) {
                chosen = Some((d, score, margin, strategy));
            }
            if strategy == Strategy::Primary && margin >= FALLBACK_MARGIN {
                break;
            }
        }
        let (d, score, margin, strategy) = chosen.expect("at least one strategy is tried");
        digits.push(char::from(b'0' + d));
        confidence[slot] = score;
        margins[slot] = margin;
        strategies[slot] = strategy;
    }
    Ok(OcrResult {
        digits,
        per_digit_confidence: confidence,
        margins,
        strategy_used: strategies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Rgb;
    use crate::plate::render_plate;

    #[test]
    fn reads_clean_plate_with_margin() {
        let p = render_plate("772951").unwrap();
        let r = read_plate(&p.image).unwrap();
        assert_eq!(r.digits, "772951");
        assert!(r.margins.iter().all(|&m| m > FALLBACK_MARGIN), "{:?}", r.margins);
        assert!(r.strategy_used.iter().all(|&s| s == Strategy::Primary));
    }

    #[test]
    fn reads_every_digit() {
        for s in ["012345", "678901", "234567", "890123"] {
            let p = render_plate(s).unwrap();
            assert_eq!(read_plate(&p.image).unwrap().digits, s);
        }
    }

    #[test]
    fn uniform_image_is_low_confidence() {
        let img = Image::filled(256, 64, Rgb::gray(128));
        let r = read_plate(&img).unwrap();
        assert_eq!(r.digits.len(), 6);
        assert!(r.margins.iter().all(|&m| m < FALLBACK_MARGIN));
    }

    #[test]
    fn candidates_are_binary_and_upscaled() {
        let p = render_plate("135790").unwrap();
        let c = preprocess_for_ocr(&p.image).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(
            c.iter().map(|c| c.strategy).collect::<Vec<_>>(),
            Strategy::ORDER.to_vec()
        );
        for cand in &c {
            assert_eq!(cand.image.dims(), (512, 128, 1));
        }
        let mut levels: Vec<u8> = c[0].image.data().to_vec();
        levels.sort_unstable();
        levels.dedup();
        assert_eq!(levels, vec![0, 255]);
    }

    #[test]
    fn otsu_splits_binary_image() {
        let mut img = Image::filled_gray(10, 10, 40);
        for x in 0..10 {
            for y in 0..4 {
                img.pixel_mut(x, y)[0] = 200;
            }
        }
        let t = otsu_threshold(&img);
        assert!((40..200).contains(&t), "threshold {t}");
    }

    #[test]
    fn rejects_wrong_size() {
        assert!(read_plate(&Image::filled(100, 64, Rgb::gray(0))).is_err());
        assert!(preprocess_for_ocr(&Image::filled(256, 63, Rgb::gray(0))).is_err());
    }
}
