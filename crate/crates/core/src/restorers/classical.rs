use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::degradation::gaussian_kernel;
use crate::error::{Error, Result};
use crate::image::{clamp_u8, Image};

pub fn restore_identity(img: &Image) -> Image {
    img.clone()
}

/// `img + amount · (img − blur(img, sigma))`, clamped.
pub fn restore_unsharp(img: &Image, amount: f64, sigma: f64) -> Result<Image> {
    if !(0.0..=3.0).contains(&amount) {
        return Err(Error::OutOfRange(format!("unsharp amount {amount} outside [0, 3]")));
    }
    if !(0.3..=3.0).contains(&sigma) {
        return Err(Error::OutOfRange(format!("unsharp sigma {sigma} outside [0.3, 3]")));
    }
    let blurred = crate::degradation::gaussian_blur(img, sigma)?;
    let data = img
        .data()
        .iter()
        .zip(blurred.data())
        .map(|(&v, &b)| clamp_u8(v as f64 + amount * (v as f64 - b as f64)))
        .collect();
    Image::from_raw(img.width(), img.height(), img.channels(), data)
}

const WIENER_PAD: usize = 16;

/// Per-channel Wiener deconvolution against a Gaussian blur of `sigma_est`:
/// `G = conj(H)·F / (|H|² + nsr)`. Each channel is edge-padded, mean-subtracted before the
/// transform and the mean is restored afterwards, so constant images pass unchanged.
pub fn restore_wiener(img: &Image, sigma_est: f64, nsr: f64) -> Result<Image> {
    if !(sigma_est.is_finite() && sigma_est > 0.0) {
        return Err(Error::OutOfRange(format!("wiener sigma {sigma_est} must be positive")));
    }
    if !(nsr > 0.0) {
        return Err(Error::OutOfRange(format!("wiener nsr {nsr} must be positive")));
    }
    let (w, h, ch) = img.dims();
    let (pw, ph) = (w + 2 * WIENER_PAD, h + 2 * WIENER_PAD);
    let mut planner = FftPlanner::<f64>::new();
    let row_fwd = planner.plan_fft_forward(pw);
    let col_fwd = planner.plan_fft_forward(ph);
    let row_inv = planner.plan_fft_inverse(pw);
    let col_inv = planner.plan_fft_inverse(ph);

    let fft2 = |buf: &mut Vec<Complex<f64>>, inverse: bool| {
        let (rows, cols) = if inverse { (&row_inv, &col_inv) } else { (&row_fwd, &col_fwd) };
        for r in buf.chunks_exact_mut(pw) {
            rows.process(r);
        }
        let mut col = vec![Complex::new(0.0, 0.0); ph];
        for x in 0..pw {
            for y in 0..ph {
                col[y] = buf[y * pw + x];
            }
            cols.process(&mut col);
            for y in 0..ph {
                buf[y * pw + x] = col[y];
            }
        }
    };

    // transfer function of the centred, wrapped PSF
    let k = gaussian_kernel(sigma_est);
    let r = (k.len() / 2) as isize;
    let mut psf = vec![Complex::new(0.0, 0.0); pw * ph];
    for dy in -r..=r {
        for dx in -r..=r {
            let x = dx.rem_euclid(pw as isize) as usize;
            let y = dy.rem_euclid(ph as isize) as usize;
            psf[y * pw + x].re += k[(dx + r) as usize] * k[(dy + r) as usize];
        }
    }
    fft2(&mut psf, false);
    let filter: Vec<Complex<f64>> = psf
        .iter()
        .map(|hf| hf.conj() / (hf.norm_sqr() + nsr))
        .collect();

    let mut out = vec![0u8; w * h * ch];
    let scale = 1.0 / (pw * ph) as f64;
    for c in 0..ch {
        let mut plane = vec![Complex::new(0.0, 0.0); pw * ph];
        for y in 0..ph {
            let sy = (y as isize - WIENER_PAD as isize).clamp(0, h as isize - 1) as usize;
            for x in 0..pw {
                let sx = (x as isize - WIENER_PAD as isize).clamp(0, w as isize - 1) as usize;
                plane[y * pw + x].re = img.pixel(sx, sy)[c] as f64;
            }
        }
        let mean = plane.iter().map(|v| v.re).sum::<f64>() * scale;
        plane.iter_mut().for_each(|v| v.re -= mean);
        fft2(&mut plane, false);
        for (v, f) in plane.iter_mut().zip(&filter) {
            *v *= f;
        }
        fft2(&mut plane, true);
        for y in 0..h {
            for x in 0..w {
                let v = plane[(y + WIENER_PAD) * pw + x + WIENER_PAD].re * scale + mean;
                out[(y * w + x) * ch + c] = clamp_u8(v);
            }
        }
    }
    Image::from_raw(w, h, ch, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::gaussian_blur;
    use crate::image::Rgb;
    use crate::metrics::psnr;
    use crate::plate::render_plate;

    fn detail(img: &Image) -> f64 {
        // mean absolute horizontal gradient
        let g = img.to_grayscale();
        let mut s = 0.0;
        for y in 0..g.height() {
            for x in 1..g.width() {
                s += (g.pixel(x, y)[0] as f64 - g.pixel(x - 1, y)[0] as f64).abs();
            }
        }
        s / (g.width() * g.height()) as f64
    }

    #[test]
    fn unsharp_zero_amount_and_uniform() {
        let p = render_plate("192837").unwrap().image;
        assert_eq!(restore_unsharp(&p, 0.0, 1.0).unwrap(), p);
        let u = Image::filled(30, 20, Rgb::new(9, 99, 199));
        assert_eq!(restore_unsharp(&u, 2.5, 2.0).unwrap(), u);
        assert!(restore_unsharp(&p, 3.5, 1.0).is_err());
        assert!(restore_unsharp(&p, 1.0, 0.1).is_err());
    }

    #[test]
    fn wiener_preserves_uniform() {
        let u = Image::filled(256, 64, Rgb::new(255, 221, 51));
        let out = restore_wiener(&u, 1.0, 0.01).unwrap();
        let worst = u.data().iter().zip(out.data()).map(|(a, b)| a.abs_diff(*b)).max().unwrap();
        assert!(worst <= 1);
    }

    #[test]
    fn wiener_detail_falls_with_nsr() {
        let p = gaussian_blur(&render_plate("604219").unwrap().image, 1.0).unwrap();
        let mut prev = f64::MAX;
        for nsr in [0.001, 0.01, 0.1, 1.0, 10.0, 1000.0] {
            let d = detail(&restore_wiener(&p, 1.0, nsr).unwrap());
            assert!(d < prev, "nsr {nsr}: {d} !< {prev}");
            prev = d;
        }
        assert!(prev < 0.5);
    }

    #[test]
    fn wiener_improves_blurred_plate() {
        let truth = render_plate("418053").unwrap().image;
        let blurred = gaussian_blur(&truth, 1.0).unwrap();
        let restored = restore_wiener(&blurred, 1.0, 0.001).unwrap();
        let gain = psnr(&restored, &truth).unwrap() - psnr(&blurred, &truth).unwrap();
        assert!(gain >= 1.0, "gain {gain}");
    }

    #[test]
    fn wiener_rejects_bad_params() {
        let u = Image::filled(16, 16, Rgb::gray(1));
        assert!(restore_wiener(&u, 0.0, 0.1).is_err());
        assert!(restore_wiener(&u, 1.0, 0.0).is_err());
    }
}
