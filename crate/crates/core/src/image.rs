//! Row-major 8-bit raster shared by every stage of the benchmark.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit RGB colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }

    pub const fn gray(v: u8) -> Self {
        Rgb([v, v, v])
    }
}

/// Axis-aligned rectangle in pixel coordinates; `x`/`y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn right(&self) -> usize {
        self.x + self.width
    }

    pub fn bottom(&self) -> usize {
        self.y + self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }
}

/// Row-major raster with 1 (gray) or 3 (RGB) interleaved 8-bit channels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl Image {
    /// Wraps raw samples, validating the dimension invariants.
    pub fn from_raw(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "expected {expected} samples for {width}x{height}x{channels}, got {}",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Uniform RGB image.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color.0);
        }
        Image {
            width,
            height,
            channels: 3,
            data,
        }
    }

    /// Uniform single-channel image.
    pub fn filled_gray(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Image {
            width,
            height,
            channels: 1,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    /// Samples of the pixel at `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: format!("{}x{}x{}", self.width, self.height, self.channels),
                right: format!("{}x{}x{}", other.width, other.height, other.channels),
            });
        }
        Ok(())
    }

    /// Exact sub-raster, no resampling.
    pub fn crop(&self, rect: Rect) -> Result<Image> {
        if rect.width == 0
            || rect.height == 0
            || rect.right() > self.width
            || rect.bottom() > self.height
        {
            return Err(Error::OutOfBounds {
                rect,
                width: self.width,
                height: self.height,
            });
        }
        let row_len = rect.width * self.channels;
        let mut data = Vec::with_capacity(row_len * rect.height);
        for y in rect.y..rect.bottom() {
            let start = self.index(rect.x, y);
            data.extend_from_slice(&self.data[start..start + row_len]);
        }
        Ok(Image {
            width: rect.width,
            height: rect.height,
            channels: self.channels,
            data,
        })
    }

    /// BT.601 luma, rounded to the nearest integer. Gray input is returned unchanged.
    pub fn to_grayscale(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| luma_u8(p[0], p[1], p[2]))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Replicates a gray image into three channels; RGB input is returned unchanged.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_png(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_png<W: Write>(&self, w: W) -> Result<()> {
        let mut encoder = png::Encoder::new(w, self.width as u32, self.height as u32);
        encoder.set_color(if self.channels == 3 {
            png::ColorType::Rgb
        } else {
            png::ColorType::Grayscale
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Png(e.to_string()))?;
        writer
            .write_image_data(&self.data)
            .map_err(|e| Error::Png(e.to_string()))?;
        writer.finish().map_err(|e| Error::Png(e.to_string()))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Png(e.to_string()))?;
        buf.truncate(info.buffer_size());
        let (w, h) = (info.width as usize, info.height as usize);
        match info.color_type {
            png::ColorType::Rgb => Image::from_raw(w, h, 3, buf),
            png::ColorType::Grayscale => Image::from_raw(w, h, 1, buf),
            png::ColorType::Rgba => {
                let rgb = buf
                    .chunks_exact(4)
                    .flat_map(|p| [p[0], p[1], p[2]])
                    .collect();
                Image::from_raw(w, h, 3, rgb)
            }
            png::ColorType::GrayscaleAlpha => {
                let g = buf.chunks_exact(2).map(|p| p[0]).collect();
                Image::from_raw(w, h, 1, g)
            }
            other => Err(Error::Png(format!("unsupported color type {other:?}"))),
        }
    }
}

/// BT.601 luma as a real number.
#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[inline]
pub fn luma_u8(r: u8, g: u8, b: u8) -> u8 {
    luma(r as f64, g as f64, b as f64).round() as u8
}

/// Rounds and clamps a real sample into `0..=255`.
#[inline]
pub fn clamp_u8(v: f64) -> u8 {
    if v <= 0.0 {
        0
    } else if v >= 255.0 {
        255
    } else {
        v.round() as u8
    }
}

/// Mean absolute sample difference (in 0..255 units) over a rectangle.
pub fn mean_abs_diff(a: &Image, b: &Image, rect: Rect) -> Result<f64> {
    a.same_shape(b)?;
    let ca = a.crop(rect)?;
    let cb = b.crop(rect)?;
    let total: u64 = ca
        .data()
        .iter()
        .zip(cb.data())
        .map(|(&x, &y)| x.abs_diff(y) as u64)
        .sum();
    Ok(total as f64 / ca.data().len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Image {
        let data = (0..4 * 3 * 3).map(|v| v as u8).collect();
        Image::from_raw(4, 3, 3, data).unwrap()
    }

    #[test]
    fn from_raw_validates_length() {
        assert!(Image::from_raw(2, 2, 3, vec![0; 11]).is_err());
        assert!(Image::from_raw(0, 2, 3, vec![]).is_err());
        assert!(Image::from_raw(2, 2, 2, vec![0; 8]).is_err());
    }

    #[test]
    fn full_crop_is_copy() {
        let img = ramp();
        assert_eq!(img.crop(img.full_rect()).unwrap(), img);
    }

    #[test]
    fn single_pixel_crop() {
        let img = ramp();
        let c = img.crop(Rect::new(0, 0, 1, 1)).unwrap();
        assert_eq!(c.data(), img.pixel(0, 0));
        let c = img.crop(Rect::new(2, 1, 1, 1)).unwrap();
        assert_eq!(c.data(), img.pixel(2, 1));
    }

    #[test]
    fn crop_out_of_bounds_rejected() {
        let img = ramp();
        assert!(matches!(
            img.crop(Rect::new(3, 0, 2, 1)),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(img.crop(Rect::new(0, 0, 0, 1)).is_err());
    }

    #[test]
    fn grayscale_values() {
        let gray = Image::filled(3, 2, Rgb::gray(100)).to_grayscale();
        assert!(gray.data().iter().all(|&v| v == 100));
        assert_eq!(gray.channels(), 1);
        assert_eq!(Image::filled(1, 1, Rgb::new(255, 0, 0)).to_grayscale().data(), &[76]);
        assert_eq!(Image::filled(1, 1, Rgb::new(0, 255, 0)).to_grayscale().data(), &[150]);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = ramp();
        img.save_png(&path).unwrap();
        assert_eq!(Image::load_png(&path).unwrap(), img);
    }
}
