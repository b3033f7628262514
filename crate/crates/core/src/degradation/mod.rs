//! The four degradation operators and their composition into one sample generator.
//!
//! Pipeline order: warp (rotation + projection) → edge blend → colour jitter → Gaussian
//! blur → JPEG → de-warp to 256×64.

mod blur;
mod edge;
mod jitter;
mod jpeg;

pub use blur::{gaussian_blur, gaussian_kernel};
pub(crate) use blur::convolve_planar;
pub use edge::{edge_blend, edge_blend_at, logistic_alpha, signed_distance};
pub use jitter::color_jitter;
pub use jpeg::{jpeg_roundtrip, scaled_table};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dewarp, dewarp_from, plate_homography, project_quad, warp, warp_region};
use crate::geometry::{AnglePair, CameraModel};
use crate::image::{Image, Rect, Rgb};
use crate::plate::{CleanPlate, PLATE_HEIGHT, PLATE_WIDTH};

pub const JITTER_RANGE: (f64, f64) = (0.8, 1.2);
pub const BLUR_SIGMA_RANGE: (f64, f64) = (0.5, 1.5);
pub const JPEG_QUALITY_RANGE: (u8, u8) = (55, 85);
pub const DEFAULT_EDGE_TAU: f64 = 1.5;
pub const CANVAS_BACKGROUND: Rgb = Rgb::gray(128);

/// Everything that determines one distorted sample apart from the clean plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    pub angles: AnglePair,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub blur_sigma: f64,
    pub jpeg_quality: u8,
    pub edge_tau: f64,
}

impl DegradationParams {
    /// Parameters that leave every photometric stage at its identity setting.
    pub fn neutral(angles: AnglePair) -> Self {
        DegradationParams {
            angles,
            brightness: 1.0,
            contrast: 1.0,
            saturation: 1.0,
            blur_sigma: BLUR_SIGMA_RANGE.0,
            jpeg_quality: 100,
            edge_tau: DEFAULT_EDGE_TAU,
        }
    }

    /// Draws jitter factors, blur sigma and JPEG quality uniformly from their ranges.
    pub fn sample<R: Rng>(angles: AnglePair, rng: &mut R) -> Self {
        let (lo, hi) = JITTER_RANGE;
        DegradationParams {
            angles,
            brightness: rng.random_range(lo..=hi),
            contrast: rng.random_range(lo..=hi),
            saturation: rng.random_range(lo..=hi),
            blur_sigma: rng.random_range(BLUR_SIGMA_RANGE.0..=BLUR_SIGMA_RANGE.1),
            jpeg_quality: rng.random_range(JPEG_QUALITY_RANGE.0..=JPEG_QUALITY_RANGE.1),
            edge_tau: DEFAULT_EDGE_TAU,
        }
    }

    /// Checks the benchmark ranges for every stage that `bypass` leaves active.
    pub fn validate(&self, bypass: &StageBypass) -> Result<()> {
        self.angles.validate()?;
        let within = |v: f64, (lo, hi): (f64, f64)| v.is_finite() && v >= lo && v <= hi;
        if !bypass.jitter
            && ![self.brightness, self.contrast, self.saturation]
                .iter()
                .all(|&f| within(f, JITTER_RANGE))
        {
            return Err(Error::OutOfRange(format!(
                "jitter factors ({}, {}, {}) outside {JITTER_RANGE:?}",
                self.brightness, self.contrast, self.saturation
            )));
        }
        if !bypass.blur && !within(self.blur_sigma, BLUR_SIGMA_RANGE) {
            return Err(Error::OutOfRange(format!(
                "blur sigma {} outside {BLUR_SIGMA_RANGE:?}",
                self.blur_sigma
            )));
        }
        if !bypass.jpeg
            && !(JPEG_QUALITY_RANGE.0..=JPEG_QUALITY_RANGE.1).contains(&self.jpeg_quality)
        {
            return Err(Error::OutOfRange(format!(
                "JPEG quality {} outside {JPEG_QUALITY_RANGE:?}",
                self.jpeg_quality
            )));
        }
        if !bypass.edge && !(self.edge_tau.is_finite() && self.edge_tau > 0.0) {
            return Err(Error::OutOfRange(format!("edge tau {}", self.edge_tau)));
        }
        Ok(())
    }
}

/// Per-stage bypass switches. All off in benchmark mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBypass {
    #[serde(default)]
    pub edge: bool,
    #[serde(default)]
    pub jitter: bool,
    #[serde(default)]
    pub blur: bool,
    #[serde(default)]
    pub jpeg: bool,
}

impl StageBypass {
    pub const NONE: StageBypass = StageBypass {
        edge: false,
        jitter: false,
        blur: false,
        jpeg: false,
    };
    pub const ALL: StageBypass = StageBypass {
        edge: true,
        jitter: true,
        blur: true,
        jpeg: true,
    };
}

/// The restorer input: a de-warped 256×64 image plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortedSample {
    pub input: Image,
    pub truth: CleanPlate,
    pub params: DegradationParams,
    pub seed: u64,
}

/// Fixed configuration of the degradation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub camera: CameraModel,
    pub background: Rgb,
    #[serde(default)]
    pub bypass: StageBypass,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            camera: CameraModel::default(),
            background: CANVAS_BACKGROUND,
            bypass: StageBypass::NONE,
        }
    }
}

impl Pipeline {
    /// Applies the pipeline to the full camera canvas, returning the degraded canvas
    /// (before de-warping) and the de-warped 256×64 restorer input.
    pub fn degrade_canvas(&self, truth: &CleanPlate, params: &DegradationParams) -> Result<(Image, Image)> {
        self.camera.validate()?;
        params.validate(&self.bypass)?;
        let cam = &self.camera;
        let h = plate_homography(params.angles, cam)?;
        let quad = project_quad(params.angles, cam);
        let mut img = warp(&truth.image, &h, (cam.canvas_width, cam.canvas_height), self.background);
        if !self.bypass.edge {
            img = edge_blend(&img, &quad, params.edge_tau, self.background);
        }
        if !self.bypass.jitter {
            img = color_jitter(&img, params.brightness, params.contrast, params.saturation);
        }
        if !self.bypass.blur {
            img = gaussian_blur(&img, params.blur_sigma)?;
        }
        if !self.bypass.jpeg {
            img = jpeg_roundtrip(&img, params.jpeg_quality)?;
        }
        let input = dewarp(&img, &h, (PLATE_WIDTH, PLATE_HEIGHT));
        Ok((img, input))
    }

    /// Produces the distorted sample for `truth` under `params`.
    ///
    /// Only the canvas window around the projected plate is processed. Outside that
    /// window the canvas is uniform background through every stage, so the result is
    /// byte-identical to [`Pipeline::degrade_canvas`].
    pub fn degrade(&self, truth: &CleanPlate, params: &DegradationParams, seed: u64) -> Result<DistortedSample> {
        self.camera.validate()?;
        params.validate(&self.bypass)?;
        let cam = &self.camera;
        let h = plate_homography(params.angles, cam)?;
        let quad = project_quad(params.angles, cam);
        let region = self.working_region(&quad, params);

        let mut img = warp_region(&truth.image, &h, self.background, region);
        if !self.bypass.edge {
            img = edge_blend_at(&img, (region.x, region.y), &quad, params.edge_tau, self.background);
        }
        if !self.bypass.jitter {
            let canvas_px = (cam.canvas_width * cam.canvas_height) as u64;
            let outside = canvas_px - (region.width * region.height) as u64;
            let sum = jitter::luma_milli_sum(&img) + outside * jitter::luma_milli(&self.background.0);
            let mean = sum as f64 / (1000.0 * canvas_px as f64);
            img = jitter::color_jitter_about(&img, params.brightness, params.contrast, params.saturation, mean);
        }
        if !self.bypass.blur {
            img = gaussian_blur(&img, params.blur_sigma)?;
        }
        if !self.bypass.jpeg {
            img = jpeg_roundtrip(&img, params.jpeg_quality)?;
        }
        let input = dewarp_from(&img, (region.x, region.y), &h, (PLATE_WIDTH, PLATE_HEIGHT));
        Ok(DistortedSample {
            input,
            truth: truth.clone(),
            params: *params,
            seed,
        })
    }

    /// Canvas window holding every pixel that can differ from the background, padded by
    /// the blur support and aligned to the 16-pixel JPEG MCU grid.
    fn working_region(&self, quad: &[[f64; 2]; 4], params: &DegradationParams) -> Rect {
        let cam = &self.camera;
        let margin = if self.bypass.blur {
            2
        } else {
            (3.0 * params.blur_sigma).ceil() as usize + 3
        };
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in quad {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        let lo = |v: f64| (v.floor().max(0.0) as usize).saturating_sub(margin) / 16 * 16;
        let hi = |v: f64, limit: usize| ((v.ceil().max(0.0) as usize + margin).div_ceil(16) * 16).min(limit);
        let (rx0, ry0) = (lo(x0), lo(y0));
        let (rx1, ry1) = (hi(x1, cam.canvas_width), hi(y1, cam.canvas_height));
        Rect::new(rx0, ry0, rx1 - rx0, ry1 - ry0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::mean_abs_diff;
    use crate::plate::render_plate;
    use crate::rng::keyed;

    #[test]
    fn crop_path_matches_full_canvas() {
        let pipe = Pipeline::default();
        let truth = render_plate("605138").unwrap();
        let mut rng = keyed(3, 0, 0);
        for (a, b) in [(0.0, 0.0), (12.5, 71.0), (45.0, 45.0), (63.0, 8.0), (88.0, 82.0), (89.0, 89.0)] {
            for _ in 0..3 {
                let params = DegradationParams::sample(AnglePair::new(a, b), &mut rng);
                let (_, full) = pipe.degrade_canvas(&truth, &params).unwrap();
                let fast = pipe.degrade(&truth, &params, 0).unwrap();
                assert_eq!(fast.input, full, "mismatch at ({a},{b}) with {params:?}");
            }
        }
    }

    #[test]
    fn identity_pipeline_reproduces_plate() {
        let pipe = Pipeline {
            bypass: StageBypass::ALL,
            ..Pipeline::default()
        };
        let truth = render_plate("246801").unwrap();
        let params = DegradationParams::neutral(AnglePair::new(0.0, 0.0));
        let s = pipe.degrade(&truth, &params, 0).unwrap();
        let mae = mean_abs_diff(&s.input, &truth.image, truth.image.full_rect()).unwrap();
        assert!(mae < 2.0, "mae {mae}");
    }

    #[test]
    fn degrade_is_deterministic() {
        let pipe = Pipeline::default();
        let truth = render_plate("112358").unwrap();
        let params = DegradationParams::sample(AnglePair::new(37.0, 52.0), &mut keyed(1, 1, 1));
        let a = pipe.degrade(&truth, &params, 9).unwrap();
        let b = pipe.degrade(&truth, &params, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.input.dims(), (256, 64, 3));
    }

    #[test]
    fn blur_and_jpeg_do_not_commute() {
        let truth = render_plate("771204").unwrap();
        let params = DegradationParams::sample(AnglePair::new(20.0, 20.0), &mut keyed(5, 5, 5));
        let pipe = Pipeline::default();
        let (canvas, _) = pipe
            .degrade_canvas(
                &truth,
                &params,
            )
            .unwrap();
        // rebuild both orders from the jittered canvas
        let p2 = Pipeline {
            bypass: StageBypass {
                blur: true,
                jpeg: true,
                ..StageBypass::NONE
            },
            ..pipe
        };
        let (jittered, _) = p2.degrade_canvas(&truth, &params).unwrap();
        let canonical = jpeg_roundtrip(&gaussian_blur(&jittered, params.blur_sigma).unwrap(), params.jpeg_quality).unwrap();
        let swapped = gaussian_blur(&jpeg_roundtrip(&jittered, params.jpeg_quality).unwrap(), params.blur_sigma).unwrap();
        assert_eq!(canonical, canvas);
        assert_ne!(canonical, swapped);
    }

    #[test]
    fn sampled_params_are_in_range() {
        let mut rng = keyed(11, 0, 0);
        for _ in 0..500 {
            let p = DegradationParams::sample(AnglePair::new(1.0, 2.0), &mut rng);
            p.validate(&StageBypass::NONE).unwrap();
        }
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let mut p = DegradationParams::neutral(AnglePair::new(0.0, 0.0));
        p.jpeg_quality = 70;
        assert!(p.validate(&StageBypass::NONE).is_ok());
        p.blur_sigma = 2.0;
        assert!(p.validate(&StageBypass::NONE).is_err());
        p.blur_sigma = 1.0;
        p.jpeg_quality = 95;
        assert!(p.validate(&StageBypass::NONE).is_err());
        p.jpeg_quality = 60;
        p.angles = AnglePair::new(90.0, 0.0);
        assert!(p.validate(&StageBypass::NONE).is_err());
    }
}
