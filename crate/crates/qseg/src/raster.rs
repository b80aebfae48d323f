//! PNG and PGM/PPM reading, PNG writing.
//!
//! Encoded PNGs carry no ancillary chunks, so equal rasters always give
//! equal bytes.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};
use qseg_core::imaging::{ColorImage, GrayImage, ImageError, Mask};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("{0}: cannot open: {1}")]
    Open(String, std::io::Error),
    #[error("{0}: cannot decode: {1}")]
    Decode(String, image::ImageError),
    #[error("cannot encode PNG: {0}")]
    Encode(image::ImageError),
    #[error("{0}: {1}")]
    Raster(String, ImageError),
}

fn decode(path: &Path) -> Result<DynamicImage, RasterError> {
    let name = path.display().to_string();
    let reader = ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| RasterError::Open(name.clone(), e))?;
    reader.decode().map_err(|e| RasterError::Decode(name, e))
}

/// Any supported image as RGB; gray inputs are replicated and alpha dropped.
pub fn read_color(path: &Path) -> Result<ColorImage, RasterError> {
    let rgb = decode(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(RasterError::Raster(path.display().to_string(), ImageError::EmptyImage));
    }
    Ok(ColorImage {
        width: w as usize,
        height: h as usize,
        channels: 3,
        data: rgb.into_raw(),
    })
}

/// Binary mask: every non-zero luma value is set.
pub fn read_mask(path: &Path) -> Result<Mask, RasterError> {
    let luma = decode(path)?.to_luma8();
    let (w, h) = luma.dimensions();
    let bits = luma.into_raw().into_iter().map(|v| v > 0).collect();
    Mask::from_raw(w as usize, h as usize, bits).map_err(|e| RasterError::Raster(path.display().to_string(), e))
}

fn encode(img: DynamicImage) -> Result<Vec<u8>, RasterError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).map_err(RasterError::Encode)?;
    Ok(out.into_inner())
}

pub fn gray_png(img: &GrayImage) -> Result<Vec<u8>, RasterError> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
        .expect("GrayImage buffers match their dimensions");
    encode(DynamicImage::ImageLuma8(buf))
}

pub fn color_png(img: &ColorImage) -> Result<Vec<u8>, RasterError> {
    if img.channels != 3 {
        return Err(RasterError::Raster(
            "color image".into(),
            ImageError::ChannelCount(img.channels),
        ));
    }
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, img.data.clone()).ok_or_else(|| {
        RasterError::Raster(
            "color image".into(),
            ImageError::BufferSize {
                expected: img.width * img.height * 3,
                got: img.data.len(),
            },
        )
    })?;
    encode(DynamicImage::ImageRgb8(buf))
}

/// Set pixels as 255 on black.
pub fn mask_png(mask: &Mask) -> Result<Vec<u8>, RasterError> {
    gray_png(&mask.to_gray())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_preserves_pixels_and_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..12 * 3 * 7).map(|i| (i * 37 % 251) as u8).collect();
        let img = ColorImage {
            width: 12,
            height: 7,
            channels: 3,
            data,
        };
        let bytes = color_png(&img).unwrap();
        assert_eq!(bytes, color_png(&img).unwrap());
        let p = dir.path().join("a.png");
        std::fs::write(&p, &bytes).unwrap();
        assert_eq!(read_color(&p).unwrap(), img);
    }

    #[test]
    fn masks_threshold_at_nonzero() {
        let dir = tempfile::tempdir().unwrap();
        let g = GrayImage::from_raw(3, 1, vec![0, 1, 255]).unwrap();
        let p = dir.path().join("m.png");
        std::fs::write(&p, gray_png(&g).unwrap()).unwrap();
        let m = read_mask(&p).unwrap();
        assert_eq!(m.bits(), &[false, true, true]);
    }

    #[test]
    fn reads_plain_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pgm");
        std::fs::write(&p, b"P2\n2 1\n255\n10 200\n").unwrap();
        let img = read_color(&p).unwrap();
        assert_eq!(img.data, vec![10, 10, 10, 200, 200, 200]);
    }

    #[test]
    fn garbage_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.png");
        std::fs::write(&p, b"not an image").unwrap();
        assert!(read_color(&p).is_err());
        assert!(matches!(
            read_color(&dir.path().join("none.png")),
            Err(RasterError::Open(..))
        ));
    }
}
