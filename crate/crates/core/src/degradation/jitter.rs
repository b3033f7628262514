use crate::image::{clamp_u8, luma, Image};

/// Integer BT.601 luma scaled by 1000; summing these is exact and order-independent.
#[inline]
pub(crate) fn luma_milli(p: &[u8]) -> u64 {
    299 * p[0] as u64 + 587 * p[1] as u64 + 114 * p[2] as u64
}

pub(crate) fn luma_milli_sum(img: &Image) -> u64 {
    img.data().chunks_exact(3).map(luma_milli).sum()
}

/// Multiplicative colour jitter: brightness scales all channels, contrast scales about
/// the image's mean luma, saturation blends each pixel with its own luma.
pub fn color_jitter(img: &Image, brightness: f64, contrast: f64, saturation: f64) -> Image {
    let img = img.to_rgb();
    let n = (img.width() * img.height()) as f64;
    let mean = luma_milli_sum(&img) as f64 / (1000.0 * n);
    color_jitter_about(&img, brightness, contrast, saturation, mean)
}

/// Jitter with a supplied pre-brightness mean luma (the crop path passes the whole
/// canvas mean here).
pub(crate) fn color_jitter_about(
    img: &Image,
    brightness: f64,
    contrast: f64,
    saturation: f64,
    mean_luma: f64,
) -> Image {
    let m = mean_luma * brightness;
    let mut out = img.to_rgb();
    for px in out.data_mut().chunks_exact_mut(3) {
        let mut v = [0.0; 3];
        for c in 0..3 {
            v[c] = (px[c] as f64 * brightness - m) * contrast + m;
        }
        let l = luma(v[0], v[1], v[2]);
        for c in 0..3 {
            px[c] = clamp_u8(l + saturation * (v[c] - l));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Rgb;
    use crate::plate::render_plate;

    #[test]
    fn unit_factors_are_identity() {
        let img = render_plate("314159").unwrap().image;
        assert_eq!(color_jitter(&img, 1.0, 1.0, 1.0), img);
    }

    #[test]
    fn brightness_scales_gray() {
        let img = Image::filled(4, 4, Rgb::gray(100));
        let out = color_jitter(&img, 1.2, 1.0, 1.0);
        assert!(out.data().iter().all(|&v| v == 120));
    }

    #[test]
    fn desaturating_red() {
        // 0.8·255 + 0.2·76.245 = 219.25, 0.2·76.245 = 15.25
        let img = Image::filled(1, 1, Rgb::new(255, 0, 0));
        let out = color_jitter(&img, 1.0, 1.0, 0.8);
        assert_eq!(out.data(), &[219, 15, 15]);
    }

    #[test]
    fn contrast_pivots_on_mean() {
        let mut img = Image::filled(2, 1, Rgb::gray(100));
        img.pixel_mut(1, 0).copy_from_slice(&[200, 200, 200]);
        let out = color_jitter(&img, 1.0, 0.8, 1.0);
        // mean 150: 150 ± 50·0.8
        assert_eq!(out.pixel(0, 0), &[110, 110, 110]);
        assert_eq!(out.pixel(1, 0), &[190, 190, 190]);
    }

    #[test]
    fn saturates_into_range() {
        let img = Image::filled(2, 2, Rgb::gray(250));
        let out = color_jitter(&img, 1.2, 1.2, 1.2);
        assert!(out.data().iter().all(|&v| v == 255));
    }
}
