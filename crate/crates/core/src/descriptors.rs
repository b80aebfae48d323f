//! Hand-crafted feature vectors for the two classifiers.
//!
//! Both descriptors are deliberately appearance-only. The image descriptor
//! summarises how much unusually dark material a surface shows and how far
//! it spreads; the region descriptor summarises the intensity distribution
//! of one isolated region. Region shape is left to the aspect-ratio filter.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::imaging::{GrayImage, Region};

/// Length of [`image_descriptor`] output.
pub const IMAGE_DESCRIPTOR_LEN: usize = 10;
/// Length of [`region_descriptor`] output.
pub const REGION_DESCRIPTOR_LEN: usize = 10;

/// Nearest-rank percentile of an already sorted slice.
fn percentile(sorted: &[u8], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)] as f64
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Whole-image descriptor of a preprocessed grayscale surface.
///
/// Entries: fractions of pixels darker than the median by 30, 60, 90 and
/// 120 levels; the median minus the 1st and 5th percentiles; the standard
/// deviation; the spatial spread of the darkest 2% of pixels relative to
/// the image diagonal; the mean absolute horizontal plus vertical gradient;
/// the median itself. Intensities are divided by 255.
pub fn image_descriptor(img: &GrayImage) -> Vec<f64> {
    let px = img.pixels();
    let mut sorted = px.to_vec();
    sorted.sort_unstable();
    let median = percentile(&sorted, 0.5);
    let n = px.len() as f64;
    let mut out = Vec::with_capacity(IMAGE_DESCRIPTOR_LEN);
    for delta in [30.0, 60.0, 90.0, 120.0] {
        out.push(px.iter().filter(|&&v| (v as f64) < median - delta).count() as f64 / n);
    }
    out.push((median - percentile(&sorted, 0.01)) / 255.0);
    out.push((median - percentile(&sorted, 0.05)) / 255.0);
    let (_, std) = mean_std(px.iter().map(|&v| v as f64));
    out.push(std / 255.0);

    let cut = percentile(&sorted, 0.02);
    let (w, h) = (img.width(), img.height());
    let dark: Vec<(f64, f64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| (img.get(x, y) as f64) <= cut)
        .map(|(x, y)| (x as f64, y as f64))
        .collect();
    let (cx, _) = mean_std(dark.iter().map(|p| p.0));
    let (cy, _) = mean_std(dark.iter().map(|p| p.1));
    let rms = (dark
        .iter()
        .map(|p| (p.0 - cx).powi(2) + (p.1 - cy).powi(2))
        .sum::<f64>()
        / dark.len().max(1) as f64)
        .sqrt();
    out.push(rms / ((w * w + h * h) as f64).sqrt());

    let mut grad = 0.0;
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                grad += (img.get(x + 1, y) as f64 - img.get(x, y) as f64).abs();
            }
            if y + 1 < h {
                grad += (img.get(x, y + 1) as f64 - img.get(x, y) as f64).abs();
            }
        }
    }
    out.push(grad / n / 255.0);
    out.push(median / 255.0);
    out
}

/// Descriptor of a region cut out with `isolate_region`.
///
/// Entries: mean, standard deviation, minimum, 10th/50th/90th percentiles
/// of the region's intensities, and the fraction of them in four 64-level
/// bins. Intensities are divided by 255.
pub fn region_descriptor(isolated: &GrayImage, region: &Region) -> Vec<f64> {
    let mut vals: Vec<u8> = region.pixels.iter().map(|&(x, y)| isolated.get(x, y)).collect();
    vals.sort_unstable();
    let (mean, std) = mean_std(vals.iter().map(|&v| v as f64));
    let mut out = Vec::with_capacity(REGION_DESCRIPTOR_LEN);
    out.push(mean / 255.0);
    out.push(std / 255.0);
    out.push(vals.first().copied().unwrap_or(255) as f64 / 255.0);
    for q in [0.1, 0.5, 0.9] {
        out.push(percentile(&vals, q) / 255.0);
    }
    let n = vals.len().max(1) as f64;
    for bin in 0..4u16 {
        let (lo, hi) = (bin * 64, bin * 64 + 64);
        out.push(vals.iter().filter(|&&v| (v as u16) >= lo && (v as u16) < hi).count() as f64 / n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::isolate_region;
    use alloc::vec;

    #[test]
    fn flat_image_has_no_dark_mass() {
        let img = GrayImage::filled(20, 20, 180);
        let d = image_descriptor(&img);
        assert_eq!(d.len(), IMAGE_DESCRIPTOR_LEN);
        assert!(d[..4].iter().all(|&v| v == 0.0));
        assert_eq!(d[6], 0.0);
    }

    #[test]
    fn dark_line_registers() {
        let mut img = GrayImage::filled(20, 20, 200);
        for x in 0..20 {
            img.set(x, 10, 20);
        }
        let d = image_descriptor(&img);
        assert!((d[3] - 0.05).abs() < 1e-12);
        // A line spanning the width spreads far from its centroid.
        assert!(d[7] > 0.15);
    }

    #[test]
    fn region_statistics() {
        let img = GrayImage::from_raw(3, 1, vec![10, 100, 250]).unwrap();
        let r = Region::from_pixels(vec![(0, 0), (1, 0)]).unwrap();
        let iso = isolate_region(&img, &r).unwrap();
        let d = region_descriptor(&iso, &r);
        assert_eq!(d.len(), REGION_DESCRIPTOR_LEN);
        assert!((d[0] - 55.0 / 255.0).abs() < 1e-12);
        assert!((d[2] - 10.0 / 255.0).abs() < 1e-12);
        assert_eq!(&d[6..], &[0.5, 0.5, 0.0, 0.0]);
    }
}
