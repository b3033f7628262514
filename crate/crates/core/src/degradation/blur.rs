use crate::error::{Error, Result};
use crate::image::{clamp_u8, Image};

/// Normalised 1D Gaussian taps for radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamp-to-edge borders. The intermediate pass is kept in
/// floating point; samples are rounded once at the end.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::OutOfRange(format!("blur sigma {sigma} must be positive")));
    }
    Ok(convolve_separable(img, &gaussian_kernel(sigma)))
}

pub(crate) fn convolve_separable(img: &Image, kernel: &[f64]) -> Image {
    let (w, h, ch) = img.dims();
    let src: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
    let tmp = convolve_planar(&src, w, h, ch, kernel);
    let out = tmp.iter().map(|&v| clamp_u8(v)).collect();
    Image::from_raw(w, h, ch, out).expect("blur preserves dimensions")
}

/// Separable clamp-to-edge convolution of an interleaved `w × h × ch` buffer.
pub(crate) fn convolve_planar(src: &[f64], w: usize, h: usize, ch: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() / 2;
    let stride = w * ch;
    let mut tmp = vec![0.0f64; w * h * ch];
    let mut padded = vec![0.0f64; (w + 2 * r) * ch];
    for y in 0..h {
        let row = &src[y * stride..(y + 1) * stride];
        for px in 0..w + 2 * r {
            let sx = px.saturating_sub(r).min(w - 1);
            padded[px * ch..(px + 1) * ch].copy_from_slice(&row[sx * ch..(sx + 1) * ch]);
        }
        let out = &mut tmp[y * stride..(y + 1) * stride];
        for (k, &kv) in kernel.iter().enumerate() {
            let shifted = &padded[k * ch..k * ch + stride];
            for (o, &v) in out.iter_mut().zip(shifted) {
                *o += kv * v;
            }
        }
    }
    let mut out = vec![0.0f64; w * h * ch];
    for y in 0..h {
        let dst = &mut out[y * stride..(y + 1) * stride];
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = (y + k).saturating_sub(r).min(h - 1);
            for (o, &v) in dst.iter_mut().zip(&tmp[sy * stride..(sy + 1) * stride]) {
                *o += kv * v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{mean_abs_diff, Rgb};
    use crate::plate::render_plate;

    /// Dense 2D convolution with the outer-product kernel, clamp-to-edge, no rounding
    /// until the end.
    fn dense_blur(img: &Image, sigma: f64) -> Image {
        let k1 = gaussian_kernel(sigma);
        let r = (k1.len() / 2) as isize;
        let (w, h, ch) = img.dims();
        let mut out = vec![0u8; w * h * ch];
        for y in 0..h as isize {
            for x in 0..w as isize {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                            let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                            acc += k1[(dx + r) as usize]
                                * k1[(dy + r) as usize]
                                * img.pixel(sx, sy)[c] as f64;
                        }
                    }
                    out[((y as usize) * w + x as usize) * ch + c] = clamp_u8(acc);
                }
            }
        }
        Image::from_raw(w, h, ch, out).unwrap()
    }

    #[test]
    fn kernel_radius_and_normalisation() {
        assert_eq!(gaussian_kernel(0.5).len(), 5);
        assert_eq!(gaussian_kernel(1.0).len(), 7);
        assert_eq!(gaussian_kernel(1.5).len(), 11);
        assert!((gaussian_kernel(1.3).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = Image::filled(20, 9, Rgb::new(3, 128, 250));
        for s in [0.5, 1.0, 1.5] {
            assert_eq!(gaussian_blur(&img, s).unwrap(), img);
        }
    }

    #[test]
    fn impulse_response_matches_dense_oracle() {
        let mut img = Image::filled_gray(15, 15, 0);
        img.pixel_mut(7, 7)[0] = 255;
        let out = gaussian_blur(&img, 1.0).unwrap();
        let oracle = dense_blur(&img, 1.0);
        assert_eq!(out, oracle);
        let w0 = gaussian_kernel(1.0)[3];
        assert_eq!(out.pixel(7, 7)[0], clamp_u8(255.0 * w0 * w0));
        for d in 1..4 {
            assert_eq!(out.pixel(7 + d, 7), out.pixel(7, 7 + d));
            assert_eq!(out.pixel(7 - d, 7), out.pixel(7, 7 + d));
        }
    }

    #[test]
    fn separable_matches_dense_on_plate() {
        let img = render_plate("407193").unwrap().image;
        let a = gaussian_blur(&img, 1.3).unwrap();
        let b = dense_blur(&img, 1.3);
        let worst = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x.abs_diff(*y))
            .max()
            .unwrap();
        assert!(worst <= 1);
    }

    #[test]
    fn semigroup_property() {
        let img = render_plate("286935").unwrap().image;
        let twice = gaussian_blur(&gaussian_blur(&img, 0.5).unwrap(), 0.5).unwrap();
        let once = dense_blur(&img, 0.5f64.sqrt());
        let mae = mean_abs_diff(&twice, &once, img.full_rect()).unwrap();
        assert!(mae < 2.0, "mae {mae}");
    }

    #[test]
    fn rejects_bad_sigma() {
        let img = Image::filled_gray(4, 4, 0);
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, f64::NAN).is_err());
    }
}
