//! Baseline JPEG round trip.
//!
//! Runs the lossy half of a baseline sequential codec: JFIF colour conversion, 4:2:0
//! chroma subsampling, 8×8 DCT, quantisation with quality-scaled Annex K tables, and the
//! matching decoder (dequantise, inverse DCT, chroma replication, colour conversion).
//! Huffman coding is lossless, so it is not needed to reproduce decoded pixels.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::image::{clamp_u8, Image};

#[rustfmt::skip]
const LUMA_QUANT: [u16; 64] = [
    16, 11, 10, 16,  24,  40,  51,  61,
    12, 12, 14, 19,  26,  58,  60,  55,
    14, 13, 16, 24,  40,  57,  69,  56,
    14, 17, 22, 29,  51,  87,  80,  62,
    18, 22, 37, 56,  68, 109, 103,  77,
    24, 35, 55, 64,  81, 104, 113,  92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103,  99,
];

#[rustfmt::skip]
const CHROMA_QUANT: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// IJG quality scaling of a base table, clamped to baseline's 1..=255.
pub fn scaled_table(base: &[u16; 64], quality: u8) -> [u16; 64] {
    let q = quality.clamp(1, 100) as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    base.map(|b| ((b as u32 * scale + 50) / 100).clamp(1, 255) as u16)
}

fn dct_basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let cu = if u == 0 { (0.125f64).sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = cu * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        m
    })
}

fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let c = dct_basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| c[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| c[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let c = dct_basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| c[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| c[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// A single component plane of 8-bit samples.
struct Plane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Plane {
    fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Quantise and reconstruct every 8×8 block of a plane whose dimensions are multiples of 8.
fn roundtrip_plane(plane: &mut Plane, table: &[u16; 64]) {
    let mut block = [0.0; 64];
    for by in (0..plane.height).step_by(8) {
        for bx in (0..plane.width).step_by(8) {
            for y in 0..8 {
                for x in 0..8 {
                    block[y * 8 + x] = plane.at(bx + x, by + y) as f64 - 128.0;
                }
            }
            let mut coef = fdct(&block);
            for (c, &q) in coef.iter_mut().zip(table) {
                *c = (*c / q as f64).round() * q as f64;
            }
            let rec = idct(&coef);
            for y in 0..8 {
                for x in 0..8 {
                    plane.data[(by + y) * plane.width + bx + x] = clamp_u8(rec[y * 8 + x] + 128.0);
                }
            }
        }
    }
}

fn align_up(v: usize, to: usize) -> usize {
    v.div_ceil(to) * to
}

/// Encodes `img` as baseline JPEG at `quality` (1..=100) and decodes it again.
pub fn jpeg_roundtrip(img: &Image, quality: u8) -> Result<Image> {
    if !(1..=100).contains(&quality) {
        return Err(Error::OutOfRange(format!("JPEG quality {quality} outside 1..=100")));
    }
    let luma_table = scaled_table(&LUMA_QUANT, quality);
    let (w, h, ch) = img.dims();
    if ch == 1 {
        let (pw, ph) = (align_up(w, 8), align_up(h, 8));
        let mut y = Plane {
            width: pw,
            height: ph,
            data: padded(img, pw, ph, |p| p[0]),
        };
        roundtrip_plane(&mut y, &luma_table);
        let data = (0..w * h).map(|i| y.at(i % w, i / w)).collect();
        return Image::from_raw(w, h, 1, data);
    }

    let chroma_table = scaled_table(&CHROMA_QUANT, quality);
    let (pw, ph) = (align_up(w, 16), align_up(h, 16));
    let ycc = |p: &[u8]| {
        let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
        [
            clamp_u8(0.299 * r + 0.587 * g + 0.114 * b),
            clamp_u8(-0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0),
            clamp_u8(0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0),
        ]
    };
    let mut planes: Vec<Plane> = (0..3)
        .map(|k| Plane {
            width: pw,
            height: ph,
            data: padded(img, pw, ph, |p| ycc(p)[k]),
        })
        .collect();
    let mut chroma: Vec<Plane> = planes
        .drain(1..)
        .map(|full| {
            let (cw, chh) = (pw / 2, ph / 2);
            let mut data = Vec::with_capacity(cw * chh);
            for y in 0..chh {
                for x in 0..cw {
                    let s = full.at(2 * x, 2 * y) as u32
                        + full.at(2 * x + 1, 2 * y) as u32
                        + full.at(2 * x, 2 * y + 1) as u32
                        + full.at(2 * x + 1, 2 * y + 1) as u32;
                    data.push(((s + 2) / 4) as u8);
                }
            }
            Plane {
                width: cw,
                height: chh,
                data,
            }
        })
        .collect();
    let mut luma = planes.pop().expect("luma plane");
    roundtrip_plane(&mut luma, &luma_table);
    for plane in &mut chroma {
        roundtrip_plane(plane, &chroma_table);
    }

    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let yy = luma.at(x, y) as f64;
            let cb = chroma[0].at(x / 2, y / 2) as f64 - 128.0;
            let cr = chroma[1].at(x / 2, y / 2) as f64 - 128.0;
            out.push(clamp_u8(yy + 1.402 * cr));
            out.push(clamp_u8(yy - 0.344_136 * cb - 0.714_136 * cr));
            out.push(clamp_u8(yy + 1.772 * cb));
        }
    }
    Image::from_raw(w, h, 3, out)
}

/// One plane extracted by `f`, padded to `pw × ph` by edge replication.
fn padded(img: &Image, pw: usize, ph: usize, f: impl Fn(&[u8]) -> u8) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        for x in 0..pw {
            data.push(f(img.pixel(x.min(w - 1), y.min(h - 1))));
        }
    }
    data
}
