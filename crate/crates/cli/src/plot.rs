//! Heatmap rendering of evaluation tables and recoverability maps.
//!
//! One cell is drawn as a `CELL × CELL` block, alpha along x and beta along y pointing
//! up. Values are mapped through a fixed three-stop ramp from (68, 1, 84) at 0 over
//! (33, 145, 140) to (253, 231, 37) at 1. Failed cells are mid gray.

use recmap_core::image::{Image, Rgb};
use recmap_core::recoverability::{BoolGrid, Envelopes, EvalTable};

pub const CELL: usize = 6;
const LEFT: usize = 30;
const BOTTOM: usize = 30;
const TOP: usize = 8;
const RIGHT: usize = 8;

pub const RAMP: [[u8; 3]; 3] = [[68, 1, 84], [33, 145, 140], [253, 231, 37]];
pub const FAILED: Rgb = Rgb([128, 128, 128]);
pub const BOUNDARY: Rgb = Rgb([255, 255, 255]);
const FRAME: Rgb = Rgb([0, 0, 0]);
const PAPER: Rgb = Rgb([255, 255, 255]);

/// Ramp colour for `t` in `[0, 1]` (clamped). NaN maps to the failed colour.
pub fn ramp(t: f64) -> Rgb {
    if t.is_nan() {
        return FAILED;
    }
    let t = t.clamp(0.0, 1.0) * 2.0;
    let (a, b, f) = if t <= 1.0 {
        (RAMP[0], RAMP[1], t)
    } else {
        (RAMP[1], RAMP[2], t - 1.0)
    };
    Rgb(std::array::from_fn(|c| {
        (a[c] as f64 + (b[c] as f64 - a[c] as f64) * f).round() as u8
    }))
}

/// Value channels of an evaluation table and their display ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    OcrPlate,
    OcrDigit,
    Psnr,
    Ssim,
}

impl Channel {
    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "ocr_plate" => Some(Channel::OcrPlate),
            "ocr_digit" => Some(Channel::OcrDigit),
            "psnr" => Some(Channel::Psnr),
            "ssim" => Some(Channel::Ssim),
            _ => None,
        }
    }

    /// Normalised value in `[0, 1]`; PSNR spans 0 to 50 dB.
    fn value(&self, c: &recmap_core::recoverability::CellStats) -> f64 {
        match self {
            Channel::OcrPlate => c.ocr_plate,
            Channel::OcrDigit => c.ocr_digit,
            Channel::Psnr => c.psnr_mean / 50.0,
            Channel::Ssim => c.ssim_mean,
        }
    }
}

pub struct Canvas {
    img: Image,
    n: usize,
}

impl Canvas {
    pub fn new(n: usize) -> Canvas {
        let w = LEFT + n * CELL + RIGHT;
        let h = TOP + n * CELL + BOTTOM;
        let mut c = Canvas {
            img: Image::filled(w, h, PAPER),
            n,
        };
        c.axes();
        c
    }

    pub fn into_image(self) -> Image {
        self.img
    }

    fn put(&mut self, x: usize, y: usize, color: Rgb) {
        if x < self.img.width() && y < self.img.height() {
            self.img.pixel_mut(x, y).copy_from_slice(&color.0);
        }
    }

    fn cell_origin(&self, alpha: usize, beta: usize) -> (usize, usize) {
        (LEFT + alpha * CELL, TOP + (self.n - 1 - beta) * CELL)
    }

    pub fn fill_cell(&mut self, alpha: usize, beta: usize, color: Rgb) {
        let (x0, y0) = self.cell_origin(alpha, beta);
        for y in y0..y0 + CELL {
            for x in x0..x0 + CELL {
                self.put(x, y, color);
            }
        }
    }

    fn hline(&mut self, x0: usize, x1: usize, y: usize, color: Rgb) {
        for x in x0.min(x1)..=x0.max(x1) {
            self.put(x, y, color);
        }
    }

    fn vline(&mut self, x: usize, y0: usize, y1: usize, color: Rgb) {
        for y in y0.min(y1)..=y0.max(y1) {
            self.put(x, y, color);
        }
    }

    fn axes(&mut self) {
        let (left, right) = (LEFT - 1, LEFT + self.n * CELL);
        let (top, bottom) = (TOP - 1, TOP + self.n * CELL);
        self.hline(left, right, top, FRAME);
        self.hline(left, right, bottom, FRAME);
        self.vline(left, top, bottom, FRAME);
        self.vline(right, top, bottom, FRAME);
        for deg in (0..self.n).step_by(10) {
            let x = LEFT + deg * CELL + CELL / 2;
            self.vline(x, bottom + 1, bottom + 3, FRAME);
            self.text(&deg.to_string(), x.saturating_sub(text_width(&deg.to_string()) / 2), bottom + 5);
            let y = TOP + (self.n - 1 - deg) * CELL + CELL / 2;
            self.hline(left - 3, left - 1, y, FRAME);
            let label = deg.to_string();
            self.text(&label, left - 5 - text_width(&label), y.saturating_sub(2));
        }
        let mid_x = LEFT + self.n * CELL / 2;
        self.glyph(&ALPHA, mid_x.saturating_sub(2), bottom + 14);
        let mid_y = TOP + self.n * CELL / 2;
        self.glyph(&BETA, 2, mid_y.saturating_sub(3));
    }

    fn text(&mut self, s: &str, x: usize, y: usize) {
        let mut cx = x;
        for ch in s.bytes() {
            if let Some(d) = ch.checked_sub(b'0').filter(|d| *d < 10) {
                self.glyph(&DIGITS[d as usize], cx, y);
            }
            cx += 4;
        }
    }

    fn glyph(&mut self, rows: &[&str], x: usize, y: usize) {
        for (dy, row) in rows.iter().enumerate() {
            for (dx, ch) in row.bytes().enumerate() {
                if ch == b'#' {
                    self.put(x + dx, y + dy, FRAME);
                }
            }
        }
    }

    /// Staircase outline of both envelopes along the outer cell edges.
    pub fn boundary(&mut self, env: &Envelopes) {
        let n = self.n;
        let bottom_edge = TOP + n * CELL - 1;
        let left_edge = LEFT;
        // top edge of the highest recoverable beta in each alpha column
        let y_of = |b: i32| TOP + (n - 1 - b as usize) * CELL;
        for a in 0..n {
            let b = env.beta_max[a];
            if b < 0 {
                continue;
            }
            let x0 = LEFT + a * CELL;
            let x1 = x0 + CELL - 1;
            self.hline(x0, x1, y_of(b), BOUNDARY);
            let next = env.beta_max.get(a + 1).copied().unwrap_or(-1);
            let y_next = if next >= 0 { y_of(next) } else { bottom_edge };
            self.vline(x1, y_of(b), y_next, BOUNDARY);
            let prev = if a > 0 { env.beta_max[a - 1] } else { -1 };
            if prev < 0 {
                self.vline(x0, y_of(b), bottom_edge, BOUNDARY);
            }
        }
        // right edge of the largest recoverable alpha in each beta row
        let x_of = |a: i32| LEFT + (a as usize + 1) * CELL - 1;
        for b in 0..n {
            let a = env.alpha_max[b];
            if a < 0 {
                continue;
            }
            let y1 = TOP + (n - 1 - b) * CELL + CELL - 1;
            let y0 = y1 + 1 - CELL;
            self.vline(x_of(a), y0, y1, BOUNDARY);
            let next = env.alpha_max.get(b + 1).copied().unwrap_or(-1);
            let x_next = if next >= 0 { x_of(next) } else { left_edge };
            self.hline(x_of(a), x_next, y0, BOUNDARY);
            let prev = if b > 0 { env.alpha_max[b - 1] } else { -1 };
            if prev < 0 {
                self.hline(left_edge, x_of(a), y1, BOUNDARY);
            }
        }
    }
}

fn text_width(s: &str) -> usize {
    s.len() * 4 - 1
}

const DIGITS: [[&str; 5]; 10] = [
    ["###", "#.#", "#.#", "#.#", "###"],
    [".#.", "##.", ".#.", ".#.", "###"],
    ["###", "..#", "###", "#..", "###"],
    ["###", "..#", "###", "..#", "###"],
    ["#.#", "#.#", "###", "..#", "..#"],
    ["###", "#..", "###", "..#", "###"],
    ["###", "#..", "###", "#.#", "###"],
    ["###", "..#", "..#", "..#", "..#"],
    ["###", "#.#", "###", "#.#", "###"],
    ["###", "#.#", "###", "..#", "###"],
];
const ALPHA: [&str; 5] = [".....", ".##.#", "#..#.", "#..#.", ".##.#"];
const BETA: [&str; 7] = [".##..", "#..#.", "###..", "#..#.", "#..#.", "###..", "#...."];

/// Heatmap of one value channel of a square table.
pub fn plot_table(table: &EvalTable, n: usize, channel: Channel) -> Image {
    let mut canvas = Canvas::new(n);
    for c in &table.cells {
        let color = if c.is_failed() {
            FAILED
        } else {
            ramp(channel.value(c))
        };
        canvas.fill_cell(c.alpha as usize, c.beta as usize, color);
    }
    canvas.into_image()
}

/// Recoverable cells at the top ramp colour, the rest at the bottom, with the boundary.
pub fn plot_map(grid: &BoolGrid, env: &Envelopes) -> Image {
    let n = grid.size();
    let mut canvas = Canvas::new(n);
    for a in 0..n {
        for b in 0..n {
            canvas.fill_cell(a, b, ramp(if grid.get(a, b) { 1.0 } else { 0.0 }));
        }
    }
    canvas.boundary(env);
    canvas.into_image()
}

#[cfg(test)]
mod tests {
    use super::*;
    use recmap_core::recoverability::envelopes;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0).0, RAMP[0]);
        assert_eq!(ramp(0.5).0, RAMP[1]);
        assert_eq!(ramp(1.0).0, RAMP[2]);
        assert_eq!(ramp(7.0).0, RAMP[2]);
        assert_eq!(ramp(f64::NAN), FAILED);
    }

    #[test]
    fn all_true_boundary_hugs_frame() {
        let g = BoolGrid::new(90, true);
        let img = plot_map(&g, &envelopes(&g));
        let top = TOP;
        let right = LEFT + 90 * CELL - 1;
        for a in 0..90 {
            assert_eq!(img.pixel(LEFT + a * CELL + 2, top), &BOUNDARY.0);
        }
        for y in TOP..TOP + 90 * CELL {
            assert_eq!(img.pixel(right, y), &BOUNDARY.0);
        }
        // interior is the recoverable colour
        assert_eq!(img.pixel(LEFT + 45 * CELL + 2, TOP + 45 * CELL + 2), &RAMP[2]);
    }

    #[test]
    fn rectangle_shows_step_at_44() {
        let g = BoolGrid::from_fn(90, |a, b| a <= 44 && b <= 44);
        let img = plot_map(&g, &envelopes(&g));
        let y44 = TOP + (89 - 44) * CELL;
        let x44 = LEFT + 45 * CELL - 1;
        assert_eq!(img.pixel(LEFT + 10 * CELL + 2, y44), &BOUNDARY.0);
        assert_eq!(img.pixel(x44, TOP + (89 - 10) * CELL + 2), &BOUNDARY.0);
        assert_eq!(img.pixel(LEFT + 60 * CELL + 2, y44), &RAMP[0]);
        assert_eq!(img.pixel(LEFT + 10 * CELL + 2, y44 + 3), &RAMP[2]);
    }

    #[test]
    fn rendering_is_deterministic() {
        let g = BoolGrid::from_fn(30, |a, b| a + b < 40);
        let a = plot_map(&g, &envelopes(&g));
        let b = plot_map(&g, &envelopes(&g));
        let (mut pa, mut pb) = (Vec::new(), Vec::new());
        a.write_png(&mut pa).unwrap();
        b.write_png(&mut pb).unwrap();
        assert_eq!(pa, pb);
    }
}
