//! Clean plate rendering with known glyph geometry.
//!
//! Digits come from a fixed stroke font that is rasterised once into 32×52 monochrome
//! bitmaps. Plates are 256×64 with six glyph slots on a 40 px pitch starting 10 px from
//! the left edge, vertically centred.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Rect, Rgb};

pub const PLATE_WIDTH: usize = 256;
pub const PLATE_HEIGHT: usize = 64;
pub const GLYPH_WIDTH: usize = 32;
pub const GLYPH_HEIGHT: usize = 52;
pub const SLOT_PITCH: usize = 40;
pub const LEFT_MARGIN: usize = 10;
pub const TOP_MARGIN: usize = (PLATE_HEIGHT - GLYPH_HEIGHT) / 2;
pub const DIGIT_COUNT: usize = 6;

pub const BACKGROUND: Rgb = Rgb::new(255, 221, 51);
pub const INK: Rgb = Rgb::new(16, 16, 16);

/// Half the stroke width of the font, in glyph pixels.
const STROKE_HALF_WIDTH: f64 = 2.75;

/// A rendered plate together with its ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanPlate {
    #[serde(skip, default = "blank_plate")]
    pub image: Image,
    pub digits: String,
    pub boxes: [Rect; DIGIT_COUNT],
}

fn blank_plate() -> Image {
    Image::filled(PLATE_WIDTH, PLATE_HEIGHT, BACKGROUND)
}

/// Glyph box of slot `i` (0-based, left to right).
pub const fn slot_box(i: usize) -> Rect {
    Rect::new(
        LEFT_MARGIN + i * SLOT_PITCH,
        TOP_MARGIN,
        GLYPH_WIDTH,
        GLYPH_HEIGHT,
    )
}

pub fn slot_boxes() -> [Rect; DIGIT_COUNT] {
    std::array::from_fn(slot_box)
}

pub fn validate_digits(digits: &str) -> Result<()> {
    if digits.len() == DIGIT_COUNT && digits.bytes().all(|b| b.is_ascii_digit()) {
        Ok(())
    } else {
        Err(Error::InvalidDigits(digits.to_string()))
    }
}

/// Renders `digits` (exactly six characters `0`-`9`) onto a clean yellow plate.
pub fn render_plate(digits: &str) -> Result<CleanPlate> {
    validate_digits(digits)?;
    let mut image = blank_plate();
    let boxes = slot_boxes();
    for (b, d) in boxes.iter().zip(digits.bytes()) {
        let glyph = glyph(d - b'0');
        for gy in 0..GLYPH_HEIGHT {
            for gx in 0..GLYPH_WIDTH {
                if glyph.ink(gx, gy) {
                    image
                        .pixel_mut(b.x + gx, b.y + gy)
                        .copy_from_slice(&INK.0);
                }
            }
        }
    }
    Ok(CleanPlate {
        image,
        digits: digits.to_string(),
        boxes,
    })
}

/// Monochrome glyph bitmap, row-major, `true` = ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glyph {
    bits: Vec<bool>,
}

impl Glyph {
    #[inline]
    pub fn ink(&self, x: usize, y: usize) -> bool {
        self.bits[y * GLYPH_WIDTH + x]
    }

    pub fn ink_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Nearest-neighbour upscale by an integer factor as 0/255 samples (255 = ink).
    pub fn upscaled_mask(&self, factor: usize) -> Image {
        let (w, h) = (GLYPH_WIDTH * factor, GLYPH_HEIGHT * factor);
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if self.ink(x / factor, y / factor) {
                    255
                } else {
                    0
                }
            })
            .collect();
        Image::from_raw(w, h, 1, data).expect("glyph dimensions are valid")
    }
}

/// Bitmap for digit `d` (0..=9).
pub fn glyph(d: u8) -> &'static Glyph {
    static GLYPHS: OnceLock<Vec<Glyph>> = OnceLock::new();
    &GLYPHS.get_or_init(|| (0..10).map(rasterize_digit).collect())[d as usize]
}

#[derive(Clone, Copy)]
enum Stroke {
    Line([f64; 2], [f64; 2]),
    /// Elliptical arc: centre, radii, start and end angle in degrees. Angles are measured
    /// with y pointing down, so 90° is the bottom of the ellipse and 270° the top.
    Arc([f64; 2], [f64; 2], f64, f64),
}

fn strokes(d: u8) -> Vec<Stroke> {
    use Stroke::{Arc, Line};
    match d {
        0 => vec![Arc([16.0, 26.0], [12.5, 22.5], 0.0, 360.0)],
        1 => vec![
            Line([17.0, 3.5], [17.0, 48.5]),
            Line([17.0, 3.5], [8.0, 12.0]),
            Line([8.0, 48.5], [26.0, 48.5]),
        ],
        2 => vec![
            Arc([16.0, 15.0], [12.5, 11.5], 190.0, 380.0),
            Line([27.75, 18.93], [3.5, 48.5]),
            Line([3.5, 48.5], [28.5, 48.5]),
        ],
        3 => vec![
            Arc([16.0, 14.5], [11.5, 11.0], 200.0, 450.0),
            Arc([16.0, 37.0], [12.5, 11.5], 270.0, 520.0),
        ],
        4 => vec![
            Line([22.0, 3.5], [3.5, 35.0]),
            Line([3.5, 35.0], [28.5, 35.0]),
            Line([22.0, 3.5], [22.0, 48.5]),
        ],
        5 => vec![
            Line([27.5, 3.5], [6.0, 3.5]),
            Line([6.0, 3.5], [5.5, 23.0]),
            Arc([15.5, 34.0], [13.0, 14.5], 225.0, 520.0),
        ],
        6 => vec![
            Arc([16.0, 35.0], [12.5, 13.5], 0.0, 360.0),
            Arc([24.0, 29.0], [20.5, 25.5], 180.0, 285.0),
        ],
        7 => vec![
            Line([3.5, 3.5], [28.5, 3.5]),
            Line([28.5, 3.5], [11.0, 48.5]),
        ],
        8 => vec![
            Arc([16.0, 14.0], [10.5, 10.5], 0.0, 360.0),
            Arc([16.0, 37.0], [12.5, 11.5], 0.0, 360.0),
        ],
        9 => vec![
            Arc([16.0, 17.0], [12.5, 13.5], 0.0, 360.0),
            Arc([8.0, 23.0], [20.5, 25.5], 0.0, 105.0),
        ],
        _ => unreachable!("digit out of range"),
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

fn rasterize_digit(d: u8) -> Glyph {
    const ARC_SEGMENTS: usize = 96;
    let mut segments = Vec::new();
    for s in strokes(d) {
        match s {
            Stroke::Line(a, b) => segments.push((a, b)),
            Stroke::Arc(c, r, start, end) => {
                let point = |t: f64| {
                    let t = t.to_radians();
                    [c[0] + r[0] * t.cos(), c[1] + r[1] * t.sin()]
                };
                for k in 0..ARC_SEGMENTS {
                    let t0 = start + (end - start) * k as f64 / ARC_SEGMENTS as f64;
                    let t1 = start + (end - start) * (k + 1) as f64 / ARC_SEGMENTS as f64;
                    segments.push((point(t0), point(t1)));
                }
            }
        }
    }
    let bits = (0..GLYPH_WIDTH * GLYPH_HEIGHT)
        .map(|i| {
            let p = [
                (i % GLYPH_WIDTH) as f64 + 0.5,
                (i / GLYPH_WIDTH) as f64 + 0.5,
            ];
            segments
                .iter()
                .any(|&(a, b)| segment_distance(p, a, b) <= STROKE_HALF_WIDTH)
        })
        .collect();
    Glyph { bits }
}
