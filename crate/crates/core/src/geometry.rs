//! Plate rotation, perspective projection and homography warping.
//!
//! Plate pixel coordinates `(u, v)` span `[0, 256] × [0, 64]` with `v` pointing down.
//! The plate is centred on the optical axis as the 3D rectangle `(u - 128, v - 32, 0)`,
//! rotated by `R_x(β) · R_y(α)`, pushed `plate_distance_px` along +Z and projected with
//! a pinhole camera whose principal point is the canvas centre.
//!
//! Images are sampled with pixel centres at half-integer continuous coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{clamp_u8, Image, Rect, Rgb};
use crate::plate::{PLATE_HEIGHT, PLATE_WIDTH};

pub const MAX_ANGLE_DEG: f64 = 89.0;

/// Viewing angles in degrees: `alpha` rotates about the vertical axis (lateral),
/// `beta` about the horizontal axis (elevational).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub alpha: f64,
    pub beta: f64,
}

impl AnglePair {
    pub fn new(alpha: f64, beta: f64) -> Self {
        AnglePair { alpha, beta }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| (0.0..=MAX_ANGLE_DEG).contains(&a);
        if ok(self.alpha) && ok(self.beta) {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "angles ({}, {}) outside [0, {MAX_ANGLE_DEG}]²",
                self.alpha, self.beta
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_px: f64,
    pub plate_distance_px: f64,
    pub canvas_width: usize,
    pub canvas_height: usize,
    pub plate_half_extent: [f64; 2],
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            focal_px: 512.0,
            plate_distance_px: 512.0,
            canvas_width: 384,
            canvas_height: 384,
            plate_half_extent: [PLATE_WIDTH as f64 / 2.0, PLATE_HEIGHT as f64 / 2.0],
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let [hx, hy] = self.plate_half_extent;
        if !(self.focal_px > 0.0) || !(hx > 0.0) || !(hy > 0.0) {
            return Err(Error::OutOfRange("camera constants must be positive".into()));
        }
        if self.plate_distance_px <= hx.hypot(hy) {
            return Err(Error::OutOfRange(format!(
                "plate distance {} does not keep the plate in front of the camera",
                self.plate_distance_px
            )));
        }
        if self.canvas_width == 0 || self.canvas_height == 0 {
            return Err(Error::OutOfRange("empty canvas".into()));
        }
        Ok(())
    }

    pub fn principal_point(&self) -> [f64; 2] {
        [
            self.canvas_width as f64 / 2.0,
            self.canvas_height as f64 / 2.0,
        ]
    }

    /// Plate rectangle corners in plate pixel coordinates, ordered TL, TR, BR, BL.
    pub fn plate_corners(&self) -> [[f64; 2]; 4] {
        let [hx, hy] = self.plate_half_extent;
        let (w, h) = (2.0 * hx, 2.0 * hy);
        [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]
    }

    /// Camera-space position of plate point `(u, v)` after rotation and translation.
    pub fn camera_point(&self, angles: AnglePair, u: f64, v: f64) -> [f64; 3] {
        let [hx, hy] = self.plate_half_extent;
        let (x, y) = (u - hx, v - hy);
        let (sa, ca) = angles.alpha.to_radians().sin_cos();
        let (sb, cb) = angles.beta.to_radians().sin_cos();
        // R_y(α)
        let x1 = x * ca;
        let z1 = -x * sa;
        // R_x(β)
        let y2 = y * cb - z1 * sb;
        let z2 = y * sb + z1 * cb;
        [x1, y2, z2 + self.plate_distance_px]
    }

    /// Projects plate point `(u, v)` onto the canvas.
    pub fn project(&self, angles: AnglePair, u: f64, v: f64) -> [f64; 2] {
        let [x, y, z] = self.camera_point(angles, u, v);
        let [cx, cy] = self.principal_point();
        [self.focal_px * x / z + cx, self.focal_px * y / z + cy]
    }
}

/// Projected plate corners on the canvas, ordered TL, TR, BR, BL.
pub fn project_quad(angles: AnglePair, cam: &CameraModel) -> [[f64; 2]; 4] {
    cam.plate_corners().map(|[u, v]| cam.project(angles, u, v))
}

/// Homography from plate pixel coordinates to canvas coordinates for `angles`.
pub fn plate_homography(angles: AnglePair, cam: &CameraModel) -> Result<Homography> {
    dlt_homography(&cam.plate_corners(), &project_quad(angles, cam))
}

/// Planar projective map stored as a row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Builds a homography, scaling so that the bottom-right entry is 1 when it is non-zero.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        let mut h = Homography { m };
        let s = m[2][2];
        if s.abs() > 1e-15 {
            for row in h.m.iter_mut() {
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
        }
        if h.det().abs() <= 1e-12 {
            return Err(Error::Degenerate(format!(
                "homography is singular (det = {:e})",
                h.det()
            )));
        }
        Ok(h)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Homography {
            m: [[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Homography {
        let m = &self.m;
        let d = self.det();
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        let mut inv = adj.map(|row| row.map(|v| v / d));
        let s = inv[2][2];
        if s.abs() > 1e-15 {
            inv = inv.map(|row| row.map(|v| v / s));
        }
        Homography { m: inv }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Homography {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Homography { m: out }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> [f64; 2] {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        [
            (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
            (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
        ]
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn check_general_position(pts: &[[f64; 2]; 4], what: &str) -> Result<()> {
    let scale = pts
        .iter()
        .flat_map(|p| pts.iter().map(move |q| (p[0] - q[0]).hypot(p[1] - q[1])))
        .fold(0.0, f64::max);
    let tol = 1e-9 * scale.max(1.0) * scale.max(1.0);
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        if cross(pts[i], pts[j], pts[k]).abs() <= tol {
            return Err(Error::Degenerate(format!(
                "{what} points {i}, {j}, {k} are collinear"
            )));
        }
    }
    Ok(())
}

/// Similarity transform moving the centroid to the origin with mean distance √2.
fn normalizing_transform(pts: &[[f64; 2]; 4]) -> Homography {
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / 4.0;
    let mean = pts
        .iter()
        .map(|p| (p[0] - cx).hypot(p[1] - cy))
        .sum::<f64>()
        / 4.0;
    let s = std::f64::consts::SQRT_2 / mean;
    Homography {
        m: [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]],
    }
}

fn solve_linear<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..N {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Four-point direct linear transform with Hartley normalisation.
pub fn dlt_homography(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Homography> {
    check_general_position(src, "source")?;
    check_general_position(dst, "destination")?;
    let ns = normalizing_transform(src);
    let nd = normalizing_transform(dst);
    let s = src.map(|p| ns.apply(p[0], p[1]));
    let d = dst.map(|p| nd.apply(p[0], p[1]));

    let mut a = [[0.0; 8]; 8];
    let mut b = [0.0; 8];
    for i in 0..4 {
        let ([x, y], [u, v]) = (s[i], d[i]);
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y];
        b[2 * i] = u;
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y];
        b[2 * i + 1] = v;
    }
    let h = solve_linear(a, b)
        .ok_or_else(|| Error::Degenerate("DLT system is singular".into()))?;
    let hn = Homography {
        m: [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]],
    };
    let full = nd.inverse().compose(&hn).compose(&ns);
    Homography::from_matrix(full.m)
}

/// Bilinear sample at continuous index coordinates (pixel centres at integers), clamping
/// to the edge. `origin` is the canvas position of `img`'s top-left pixel.
#[inline]
fn sample_bilinear(img: &Image, origin: (isize, isize), fx: f64, fy: f64, out: &mut [f64]) {
    let x0f = fx.floor();
    let y0f = fy.floor();
    let tx = fx - x0f;
    let ty = fy - y0f;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let xa = (x0f as isize - origin.0).clamp(0, w - 1) as usize;
    let xb = (x0f as isize + 1 - origin.0).clamp(0, w - 1) as usize;
    let ya = (y0f as isize - origin.1).clamp(0, h - 1) as usize;
    let yb = (y0f as isize + 1 - origin.1).clamp(0, h - 1) as usize;
    let (p00, p10) = (img.pixel(xa, ya), img.pixel(xb, ya));
    let (p01, p11) = (img.pixel(xa, yb), img.pixel(xb, yb));
    for c in 0..img.channels() {
        let top = p00[c] as f64 + (p10[c] as f64 - p00[c] as f64) * tx;
        let bot = p01[c] as f64 + (p11[c] as f64 - p01[c] as f64) * tx;
        out[c] = top + (bot - top) * ty;
    }
}

/// Inverse-mapping warp of `img` onto a `canvas`-sized raster, where `h` maps source
/// coordinates to destination coordinates. Destinations whose pre-image falls outside
/// the source get `background`.
pub fn warp(img: &Image, h: &Homography, canvas: (usize, usize), background: Rgb) -> Image {
    warp_region(img, h, background, Rect::new(0, 0, canvas.0, canvas.1))
}

/// Like [`warp`] but only computes the destination pixels inside `region`; the result is
/// the corresponding crop of the full warp.
pub fn warp_region(img: &Image, h: &Homography, background: Rgb, region: Rect) -> Image {
    let img = img.to_rgb();
    let inv = h.inverse();
    let (sw, sh) = (img.width() as f64, img.height() as f64);
    let mut out = Image::filled(region.width, region.height, background);
    let mut px = [0.0; 3];
    for y in 0..region.height {
        for x in 0..region.width {
            let [u, v] = inv.apply(
                (region.x + x) as f64 + 0.5,
                (region.y + y) as f64 + 0.5,
            );
            if !(u >= 0.0 && u < sw && v >= 0.0 && v < sh) {
                continue;
            }
            sample_bilinear(&img, (0, 0), u - 0.5, v - 0.5, &mut px);
            let dst = out.pixel_mut(x, y);
            for c in 0..3 {
                dst[c] = clamp_u8(px[c]);
            }
        }
    }
    out
}

/// Re-aligns a warped canvas to the plate frame: each output pixel is mapped through the
/// output-to-plate scale and then `h`, and sampled bilinearly.
pub fn dewarp(img: &Image, h: &Homography, out_size: (usize, usize)) -> Image {
    dewarp_from(img, (0, 0), h, out_size)
}

/// [`dewarp`] from a canvas crop whose top-left pixel sits at `origin` on the canvas.
pub fn dewarp_from(
    img: &Image,
    origin: (usize, usize),
    h: &Homography,
    out_size: (usize, usize),
) -> Image {
    let (ow, oh) = out_size;
    let sx = PLATE_WIDTH as f64 / ow as f64;
    let sy = PLATE_HEIGHT as f64 / oh as f64;
    let map = h.compose(&Homography::scale(sx, sy));
    let origin = (origin.0 as isize, origin.1 as isize);
    let channels = img.channels();
    let mut data = vec![0u8; ow * oh * channels];
    let mut px = [0.0; 3];
    for y in 0..oh {
        for x in 0..ow {
            let [cx, cy] = map.apply(x as f64 + 0.5, y as f64 + 0.5);
            sample_bilinear(img, origin, cx - 0.5, cy - 0.5, &mut px);
            let base = (y * ow + x) * channels;
            for c in 0..channels {
                data[base + c] = clamp_u8(px[c]);
            }
        }
    }
    Image::from_raw(ow, oh, channels, data).expect("dewarp output dimensions are valid")
}

/// Horizontal and vertical extents of a quad's bounding box.
pub fn quad_extent(quad: &[[f64; 2]; 4]) -> (f64, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in quad {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    (x1 - x0, y1 - y0)
}
