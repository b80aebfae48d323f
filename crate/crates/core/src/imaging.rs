//! Image preprocessing, region analysis and a synthetic crack generator.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("expected 3 channels, got {0}")]
    ChannelCount(usize),
    #[error("buffer holds {got} values, {expected} expected")]
    BufferSize { expected: usize, got: usize },
    #[error("image dimensions must be non-zero")]
    EmptyImage,
    #[error("cannot resample {from_w}x{from_h} to {to_w}x{to_h}")]
    BadTarget {
        from_w: usize,
        from_h: usize,
        to_w: usize,
        to_h: usize,
    },
    #[error("blur sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("pixel ({0}, {1}) lies outside the image")]
    OutOfBounds(usize, usize),
}

/// 8-bit grayscale raster, row major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage);
        }
        if data.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Interleaved multi-channel 8-bit raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl ColorImage {
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            channels: 3,
            data: img.data.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }
}

/// Luminance `0.299 R + 0.587 G + 0.114 B`, rounded to nearest.
pub fn to_grayscale(img: &ColorImage) -> Result<GrayImage, ImageError> {
    if img.channels != 3 {
        return Err(ImageError::ChannelCount(img.channels));
    }
    let expected = img.width * img.height * 3;
    if img.data.len() != expected {
        return Err(ImageError::BufferSize {
            expected,
            got: img.data.len(),
        });
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let l = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
            l.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::from_raw(img.width, img.height, data)
}

/// Area-average resampling to a smaller (or equal) size.
///
/// Each output pixel is the coverage-weighted mean of the source pixels its
/// footprint overlaps, so constant images stay constant.
pub fn downscale(img: &GrayImage, target_w: usize, target_h: usize) -> Result<GrayImage, ImageError> {
    if target_w == 0 || target_h == 0 || target_w > img.width || target_h > img.height {
        return Err(ImageError::BadTarget {
            from_w: img.width,
            from_h: img.height,
            to_w: target_w,
            to_h: target_h,
        });
    }
    if target_w == img.width && target_h == img.height {
        return Ok(img.clone());
    }
    let xs = footprints(img.width, target_w);
    let ys = footprints(img.height, target_h);
    let mut out = Vec::with_capacity(target_w * target_h);
    for yspan in &ys {
        for xspan in &xs {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for &(sy, wy) in yspan {
                for &(sx, wx) in xspan {
                    let w = wx * wy;
                    acc += w * img.get(sx, sy) as f64;
                    wsum += w;
                }
            }
            out.push((acc / wsum).round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::from_raw(target_w, target_h, out)
}

/// For each output cell, the source indices it covers and their overlap.
fn footprints(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let w = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    (w > 1e-12).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

/// Normalized 1-D taps of the 5-tap Gaussian.
pub fn gaussian_kernel5(sigma: f64) -> Result<[f64; 5], ImageError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ImageError::BadSigma(sigma));
    }
    let mut k = [0.0; 5];
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *w = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    Ok(k)
}

/// Separable 5x5 Gaussian blur with edge replication.
pub fn gaussian_blur5(img: &GrayImage, sigma: f64) -> Result<GrayImage, ImageError> {
    let k = gaussian_kernel5(sigma)?;
    let (w, h) = (img.width, img.height);
    let clampi = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (0..5)
                .map(|i| k[i] * img.get(clampi(x as isize + i as isize - 2, w), y) as f64)
                .sum();
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v: f64 = (0..5)
                .map(|i| k[i] * tmp[clampi(y as isize + i as isize - 2, h) * w + x])
                .sum();
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::from_raw(w, h, out)
}

/// Binary raster aligned to an image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    /// Pixels strictly below `threshold` become set.
    pub fn below(img: &GrayImage, threshold: u8) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| v < threshold).collect(),
        }
    }

    /// Pixels at or above `threshold` become set.
    pub fn at_least(img: &GrayImage, threshold: u8) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| v >= threshold).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// `true` where every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Renders set pixels as 255 on a 0 background.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    /// Area-average downscale; an output pixel is set when at least half of
    /// its footprint is.
    pub fn downscale(&self, target_w: usize, target_h: usize) -> Result<Mask, ImageError> {
        let g = downscale(&self.to_gray(), target_w, target_h)?;
        Ok(Mask::at_least(&g, 128))
    }
}

/// `|a & b| / |a | b|`; two empty masks score 1.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64, ImageError> {
    if a.width != b.width || a.height != b.height {
        return Err(ImageError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
    }
}

/// Minimum-area rectangle enclosing a pixel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: (f64, f64),
    /// Extent along `angle`.
    pub length: f64,
    /// Extent perpendicular to `angle`.
    pub breadth: f64,
    /// Direction of the `length` side, radians.
    pub angle: f64,
}

impl OrientedBox {
    pub fn area(&self) -> f64 {
        self.length * self.breadth
    }

    /// Long side over short side, short side floored at one pixel.
    pub fn aspect_ratio(&self) -> f64 {
        let long = self.length.max(self.breadth);
        let short = self.length.min(self.breadth).max(1.0);
        (long / short).max(1.0)
    }
}

/// A connected set of pixels with its oriented bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// `(x, y)` coordinates in scan order.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: OrientedBox,
    pub aspect_ratio: f64,
}

impl Region {
    pub fn from_pixels(pixels: Vec<(usize, usize)>) -> Option<Self> {
        let bbox = oriented_bbox(&pixels)?;
        Some(Self {
            aspect_ratio: bbox.aspect_ratio(),
            pixels,
            bbox,
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn to_mask(&self, width: usize, height: usize) -> Mask {
        let mut m = Mask::empty(width, height);
        for &(x, y) in &self.pixels {
            m.set(x, y, true);
        }
        m
    }
}

/// Connected components of the set pixels, in scan order of their first
/// pixel. Components smaller than `min_size` are dropped.
pub fn extract_regions(mask: &Mask, connectivity: Connectivity, min_size: usize) -> Vec<Region> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.data[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if pixels.len() >= min_size.max(1) {
            pixels.sort_unstable_by_key(|&(x, y)| (y, x));
            regions.extend(Region::from_pixels(pixels));
        }
    }
    regions
}

/// Copies the region's pixels onto a white canvas of the same size.
pub fn isolate_region(img: &GrayImage, region: &Region) -> Result<GrayImage, ImageError> {
    let mut out = GrayImage::filled(img.width, img.height, 255);
    for &(x, y) in &region.pixels {
        if x >= img.width || y >= img.height {
            return Err(ImageError::OutOfBounds(x, y));
        }
        out.set(x, y, img.get(x, y));
    }
    Ok(out)
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise, no collinear points) by monotone chain.
pub fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    // The upper chain may not pop into the finished lower chain.
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Minimum-area rectangle around the corners of every pixel in the set.
///
/// Rotating calipers: the optimal rectangle has a side collinear with a hull
/// edge, so every edge direction is tried.
pub fn oriented_bbox(pixels: &[(usize, usize)]) -> Option<OrientedBox> {
    if pixels.is_empty() {
        return None;
    }
    let corners: Vec<(i64, i64)> = pixels
        .iter()
        .flat_map(|&(x, y)| {
            let (x, y) = (x as i64, y as i64);
            [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]
        })
        .collect();
    let hull = convex_hull(&corners);
    let mut best: Option<OrientedBox> = None;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let (dx, dy) = ((b.0 - a.0) as f64, (b.1 - a.1) as f64);
        let norm = (dx * dx + dy * dy).sqrt();
        let (ux, uy) = (dx / norm, dy / norm);
        let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(px, py) in &hull {
            let (px, py) = (px as f64, py as f64);
            let u = px * ux + py * uy;
            let v = -px * uy + py * ux;
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        let (length, breadth) = (umax - umin, vmax - vmin);
        if best.is_none_or(|b| length * breadth < b.area() - 1e-9) {
            let (cu, cv) = ((umin + umax) / 2.0, (vmin + vmax) / 2.0);
            best = Some(OrientedBox {
                center: (cu * ux - cv * uy, cu * uy + cv * ux),
                length,
                breadth,
                angle: uy.atan2(ux),
            });
        }
    }
    best
}

/// Overlay of `mask` in red on a grayscale image.
pub fn overlay(img: &GrayImage, mask: &Mask) -> Result<ColorImage, ImageError> {
    if img.width != mask.width || img.height != mask.height {
        return Err(ImageError::DimensionMismatch(
            img.width,
            img.height,
            mask.width,
            mask.height,
        ));
    }
    let mut out = ColorImage::from_gray(img);
    for (i, &m) in mask.data.iter().enumerate() {
        if m {
            out.data[3 * i..3 * i + 3].copy_from_slice(&[255, 0, 0]);
        }
    }
    Ok(out)
}

/// Axis-aligned non-crack aberration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub x: f64,
    pub y: f64,
    /// Half side of the square.
    pub half: f64,
    pub intensity: u8,
}

/// Geometry and appearance of one synthetic surface image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackSpec {
    pub width: usize,
    pub height: usize,
    /// Each polyline is one crack; vertices in pixel coordinates.
    pub cracks: Vec<Vec<(f64, f64)>>,
    /// Full stroke width in pixels; 0 draws nothing.
    pub thickness: f64,
    pub crack_intensity: u8,
    pub background: u8,
    /// Standard deviation of per-pixel Gaussian texture.
    pub noise: f64,
    pub blobs: Vec<Blob>,
    pub seed: u64,
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    };
    let (dx, dy) = (p.0 - a.0 - t * vx, p.1 - a.1 - t * vy);
    (dx * dx + dy * dy).sqrt()
}

/// Renders a textured surface with dark crack strokes and returns the image
/// together with the exact crack mask.
///
/// A pixel belongs to a crack when its center lies within `thickness / 2` of
/// a polyline. Blobs are drawn first and never enter the mask; crack strokes
/// paint over them.
pub fn generate_crack_image(spec: &CrackSpec) -> (ColorImage, Mask) {
    let (w, h) = (spec.width, spec.height);
    let mut rng = rng_from_seed(spec.seed);
    let noise = Normal::new(0.0, spec.noise.max(0.0)).expect("finite noise");
    // Slow shading across the surface.
    let phase = rng.random::<f64>() * 2.0 * PI;
    let mut mask = Mask::empty(w, h);
    let mut data = Vec::with_capacity(w * h * 3);
    let half = spec.thickness / 2.0;
    for y in 0..h {
        for x in 0..w {
            let c = (x as f64 + 0.5, y as f64 + 0.5);
            let shade = 6.0 * ((c.0 / w as f64 * 2.0 * PI) + phase).sin();
            let mut base = spec.background as f64 + shade;
            for b in &spec.blobs {
                if (c.0 - b.x).abs() <= b.half && (c.1 - b.y).abs() <= b.half {
                    base = b.intensity as f64;
                }
            }
            let on_crack = half > 0.0
                && spec
                    .cracks
                    .iter()
                    .any(|line| line.windows(2).any(|s| segment_distance(c, s[0], s[1]) <= half));
            if on_crack {
                base = spec.crack_intensity as f64;
                mask.set(x, y, true);
            }
            let v = base + noise.sample(&mut rng);
            // Warm tint so the grayscale conversion is exercised.
            let r = (v * 1.03).round().clamp(0.0, 255.0) as u8;
            let g = v.round().clamp(0.0, 255.0) as u8;
            let bch = (v * 0.92).round().clamp(0.0, 255.0) as u8;
            data.extend_from_slice(&[r, g, bch]);
        }
    }
    (
        ColorImage {
            width: w,
            height: h,
            channels: 3,
            data,
        },
        mask,
    )
}

/// Knobs for drawing random [`CrackSpec`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub thickness: f64,
    pub noise: f64,
    /// Inclusive range of crack gray levels.
    pub crack_intensity: (u8, u8),
    pub background: (u8, u8),
    /// Inclusive range of blob counts per image.
    pub blobs: (usize, usize),
    pub blob_half: (f64, f64),
    pub blob_intensity: (u8, u8),
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 100,
            height: 100,
            thickness: 4.0,
            noise: 6.0,
            crack_intensity: (25, 60),
            background: (175, 215),
            blobs: (0, 2),
            blob_half: (6.0, 9.0),
            blob_intensity: (120, 150),
        }
    }
}

fn uniform_u8(rng: &mut crate::rng::Rng, (lo, hi): (u8, u8)) -> u8 {
    rng.random_range(lo..=hi.max(lo))
}

fn uniform_f64(rng: &mut crate::rng::Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl SceneConfig {
    /// Small dark square aberrations that look like crack material.
    pub fn square_blobs() -> Self {
        Self {
            blobs: (1, 3),
            blob_half: (3.0, 6.0),
            blob_intensity: (20, 60),
            ..Self::default()
        }
    }

    /// A random scene with or without a crack.
    pub fn sample(&self, with_crack: bool, seed: u64) -> CrackSpec {
        let mut rng = rng_from_seed(seed);
        let (w, h) = (self.width as f64, self.height as f64);
        let mut cracks = Vec::new();
        if with_crack {
            // Enter on one edge, wander across to the opposite one.
            let vertical = rng.random::<bool>();
            let steps = 5;
            let mut line = Vec::with_capacity(steps + 1);
            let mut across = uniform_f64(&mut rng, (0.25, 0.75));
            for i in 0..=steps {
                let along = i as f64 / steps as f64;
                across = (across + uniform_f64(&mut rng, (-0.12, 0.12))).clamp(0.1, 0.9);
                line.push(if vertical {
                    (across * w, along * h)
                } else {
                    (along * w, across * h)
                });
            }
            cracks.push(line);
        }
        let n_blobs = rng.random_range(self.blobs.0..=self.blobs.1.max(self.blobs.0));
        let blobs = (0..n_blobs)
            .map(|_| {
                let half = uniform_f64(&mut rng, self.blob_half);
                Blob {
                    x: uniform_f64(&mut rng, (half + 1.0, (w - half - 1.0).max(half + 1.0))),
                    y: uniform_f64(&mut rng, (half + 1.0, (h - half - 1.0).max(half + 1.0))),
                    half,
                    intensity: uniform_u8(&mut rng, self.blob_intensity),
                }
            })
            .collect();
        CrackSpec {
            width: self.width,
            height: self.height,
            cracks,
            thickness: self.thickness,
            crack_intensity: uniform_u8(&mut rng, self.crack_intensity),
            background: uniform_u8(&mut rng, self.background),
            noise: self.noise,
            blobs,
            seed: rng.random(),
        }
    }
}
