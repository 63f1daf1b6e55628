//! RGB image helpers: PNG I/O, bilinear sampling and resampling, cropping.

use std::fs;
use std::io;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use crate::raster::Rect;

pub const BLACK: Rgb<u8> = Rgb([0, 0, 0]);

pub fn read_png(path: &Path) -> image::ImageResult<RgbImage> {
    let img = image::ImageReader::open(path)?.with_guessed_format()?.decode()?;
    Ok(img.to_rgb8())
}

/// Encode to PNG bytes. The encoder is deterministic for identical pixels.
pub fn encode_png(img: &RgbImage) -> image::ImageResult<Vec<u8>> {
    let mut buf = io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Write through a temporary sibling file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn write_png(path: &Path, img: &RgbImage) -> io::Result<()> {
    let bytes = encode_png(img).map_err(io::Error::other)?;
    write_atomic(path, &bytes)
}

pub fn solid(width: u32, height: u32, color: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(width, height, Rgb(color))
}

/// Bilinear sample at a real-valued position.
///
/// A pixel covers `[i - 0.5, i + 0.5]`; positions outside the union of the
/// footprints return `None`. Inside, the position is clamped to the pixel
/// center grid before blending the four neighbors.
pub fn sample_bilinear(img: &RgbImage, x: f64, y: f64) -> Option<Rgb<u8>> {
    let (w, h) = img.dimensions();
    if !(x >= -0.5 && x <= w as f64 - 0.5 && y >= -0.5 && y <= h as f64 - 0.5) {
        return None;
    }
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;

    let p00 = img.get_pixel(x0, y0).0;
    let p10 = img.get_pixel(x1, y0).0;
    let p01 = img.get_pixel(x0, y1).0;
    let p11 = img.get_pixel(x1, y1).0;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        out[c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
    Some(Rgb(out))
}

/// Bilinear resize with half-pixel-center alignment.
pub fn resize_bilinear(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (sw, sh) = img.dimensions();
    if (sw, sh) == (width, height) {
        return img.clone();
    }
    let sx = sw as f64 / width as f64;
    let sy = sh as f64 / height as f64;
    RgbImage::from_fn(width, height, |x, y| {
        let u = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
        let v = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
        sample_bilinear(img, u, v).unwrap_or(BLACK)
    })
}

pub fn crop(img: &RgbImage, rect: &Rect) -> RgbImage {
    image::imageops::crop_imm(img, rect.x, rect.y, rect.width, rect.height).to_image()
}

/// Channel-wise `(min, max)` over all pixels.
pub fn value_range(img: &RgbImage) -> ([u8; 3], [u8; 3]) {
    let mut lo = [u8::MAX; 3];
    let mut hi = [u8::MIN; 3];
    for p in img.pixels() {
        for c in 0..3 {
            lo[c] = lo[c].min(p.0[c]);
            hi[c] = hi[c].max(p.0[c]);
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_positions_sample_exactly() {
        let img = RgbImage::from_fn(3, 2, |x, y| Rgb([x as u8 * 10, y as u8 * 20, 7]));
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(sample_bilinear(&img, x as f64, y as f64), Some(*img.get_pixel(x, y)));
            }
        }
    }

    #[test]
    fn midpoint_blends_evenly() {
        let mut img = solid(2, 1, [0, 0, 0]);
        img.put_pixel(1, 0, Rgb([100, 200, 255]));
        assert_eq!(sample_bilinear(&img, 0.5, 0.0), Some(Rgb([50, 100, 128])));
    }

    #[test]
    fn outside_footprint_is_none() {
        let img = solid(4, 4, [9, 9, 9]);
        assert!(sample_bilinear(&img, -0.51, 1.0).is_none());
        assert!(sample_bilinear(&img, 3.5, 3.5).is_some());
        assert!(sample_bilinear(&img, 1.0, 3.6).is_none());
    }

    #[test]
    fn resize_identity_and_constancy() {
        let img = RgbImage::from_fn(5, 4, |x, y| Rgb([x as u8, y as u8, 3]));
        assert_eq!(resize_bilinear(&img, 5, 4), img);
        let gray = solid(7, 3, [128, 128, 128]);
        assert_eq!(resize_bilinear(&gray, 13, 9), solid(13, 9, [128, 128, 128]));
    }
}
