//! Bare line charts: a framed plot area, one polyline per series, no text.
//! The CSV written next to every chart carries the numbers.

use qseg_core::imaging::ColorImage;

pub const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [214, 39, 40],
    [44, 160, 44],
    [255, 127, 14],
    [148, 103, 189],
    [23, 190, 207],
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axes {
    pub width: usize,
    pub height: usize,
    pub log_x: bool,
    pub log_y: bool,
}

impl Default for Axes {
    fn default() -> Self {
        Self {
            width: 640,
            height: 400,
            log_x: false,
            log_y: false,
        }
    }
}

const MARGIN: usize = 30;

struct Canvas {
    img: ColorImage,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.img.width || y as usize >= self.img.height {
            return;
        }
        let i = 3 * (y as usize * self.img.width + x as usize);
        self.img.data[i..i + 3].copy_from_slice(&c);
    }

    /// Bresenham segment, two pixels thick.
    fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, c);
            self.put(x0 + 1, y0, c);
            self.put(x0, y0 + 1, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
}

fn transform(v: f64, log: bool) -> Option<f64> {
    let t = if log { v.log10() } else { v };
    t.is_finite().then_some(t)
}

/// Renders `series` on a white background. Points that are not finite
/// after the axis transform are skipped.
pub fn line_chart(series: &[Series], axes: Axes) -> ColorImage {
    let (w, h) = (axes.width.max(2 * MARGIN + 2), axes.height.max(2 * MARGIN + 2));
    let mut canvas = Canvas {
        img: ColorImage {
            width: w,
            height: h,
            channels: 3,
            data: vec![255; w * h * 3],
        },
    };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter_map(|&(x, y)| Some((transform(x, axes.log_x)?, transform(y, axes.log_y)?)))
                .collect()
        })
        .collect();
    let all = || pts.iter().flatten();
    let (mut x_lo, mut x_hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y_lo, mut y_hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x_lo.partial_cmp(&x_hi) != Some(std::cmp::Ordering::Less) {
        (x_lo, x_hi) = (x_lo.min(0.0) - 0.5, x_hi.max(0.0) + 0.5);
    }
    if y_lo.partial_cmp(&y_hi) != Some(std::cmp::Ordering::Less) {
        (y_lo, y_hi) = (y_lo.min(0.0) - 0.5, y_hi.max(0.0) + 0.5);
    }
    let (left, right, top, bottom) = (MARGIN as i64, (w - MARGIN) as i64, MARGIN as i64, (h - MARGIN) as i64);
    let black = [0, 0, 0];
    canvas.line((left, top), (left, bottom), black);
    canvas.line((left, bottom), (right, bottom), black);
    canvas.line((left, top), (right, top), [200, 200, 200]);
    canvas.line((right, top), (right, bottom), [200, 200, 200]);
    let px = |x: f64| left + ((x - x_lo) / (x_hi - x_lo) * (right - left) as f64).round() as i64;
    let py = |y: f64| bottom - ((y - y_lo) / (y_hi - y_lo) * (bottom - top) as f64).round() as i64;
    for (s, p) in series.iter().zip(&pts) {
        for pair in p.windows(2) {
            canvas.line((px(pair[0].0), py(pair[0].1)), (px(pair[1].0), py(pair[1].1)), s.color);
        }
        if let [only] = p.as_slice() {
            canvas.line((px(only.0), py(only.1)), (px(only.0), py(only.1)), s.color);
        }
    }
    canvas.img
}
