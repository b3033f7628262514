//! Oblique license-plate degradation benchmark and recoverability analytics.
//!
//! The crate is organised along the benchmark's data flow:
//!
//! 1. [`image`] and [`plate`] – pixel rasters and the clean plate renderer.
//! 2. [`geometry`] – plate rotation, perspective projection, homographies, warping.
//! 3. [`degradation`] – edge blending, colour jitter, blur, JPEG and the full pipeline.
//! 4. [`sampling`] – Sobol angle sampling, angle densities and dataset materialisation.
//! 5. [`metrics`] and [`ocr`] – PSNR/SSIM, worst-digit variants and the template OCR.
//! 6. [`restorers`] – built-in baselines and the external plugin protocol.
//! 7. [`recoverability`] – grid evaluation, recoverability maps, AUC, F and proxy fits.

pub mod degradation;
pub mod error;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod ocr;
pub mod plate;
pub mod recoverability;
pub mod restorers;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use image::{Image, Rect, Rgb};
pub use plate::{render_plate, CleanPlate};
