use crate::image::{clamp_u8, Image, Rgb};

fn segment_distance_sq(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    ex * ex + ey * ey
}

fn inside(p: [f64; 2], quad: &[[f64; 2]; 4]) -> bool {
    // crossing-number test, valid for any simple quad
    let mut c = false;
    for i in 0..4 {
        let (a, b) = (quad[i], quad[(i + 1) % 4]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                c = !c;
            }
        }
    }
    c
}

/// Signed distance from `p` to the boundary of `quad`, positive inside.
pub fn signed_distance(p: [f64; 2], quad: &[[f64; 2]; 4]) -> f64 {
    let d = (0..4)
        .map(|i| segment_distance_sq(p, quad[i], quad[(i + 1) % 4]))
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    if inside(p, quad) {
        d
    } else {
        -d
    }
}

/// Logistic alpha for signed distance `d` with softness `tau`.
#[inline]
pub fn logistic_alpha(d: f64, tau: f64) -> f64 {
    1.0 / (1.0 + (-d / tau).exp())
}

/// Soft-edged compositing of a warped plate over `background`, using a signed-distance
/// field to the projected quad and logistic smoothing of width `tau`.
pub fn edge_blend(warped: &Image, quad: &[[f64; 2]; 4], tau: f64, background: Rgb) -> Image {
    edge_blend_at(warped, (0, 0), quad, tau, background)
}

/// [`edge_blend`] for a canvas crop whose top-left pixel sits at `origin`.
pub fn edge_blend_at(
    warped: &Image,
    origin: (usize, usize),
    quad: &[[f64; 2]; 4],
    tau: f64,
    background: Rgb,
) -> Image {
    let mut out = warped.to_rgb();
    // beyond this many tau the logistic weight is exactly 0 or 1 in f64
    let saturated = 40.0 * tau;
    for y in 0..out.height() {
        for x in 0..out.width() {
            let p = [
                (origin.0 + x) as f64 + 0.5,
                (origin.1 + y) as f64 + 0.5,
            ];
            let d = signed_distance(p, quad);
            let px = out.pixel_mut(x, y);
            if d > saturated {
                continue;
            }
            if d < -saturated {
                px.copy_from_slice(&background.0);
                continue;
            }
            let a = logistic_alpha(d, tau);
            for c in 0..3 {
                px[c] = clamp_u8(a * px[c] as f64 + (1.0 - a) * background.0[c] as f64);
            }
        }
    }
    out
}
