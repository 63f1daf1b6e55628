//! Built-in feature extractor used when no feature file is available for a
//! garment. Each grid cell carries the box-averaged RGB of the crop (0..1)
//! and the box-averaged Sobel gradient magnitude of its luminance.

use image::RgbImage;

use crate::data::FeatureMap;

pub const GRID_ROWS: usize = 48;
pub const GRID_COLS: usize = 16;
pub const FALLBACK_DIM: usize = 4;

/// Pixel span covered by grid cell `i` of `n` along an axis of length `len`.
/// Cells never come out empty, so crops smaller than the grid reuse pixels.
fn span(i: usize, n: usize, len: usize) -> (usize, usize) {
    let start = i * len / n;
    let end = ((i + 1) * len / n).max(start + 1).min(len);
    (start.min(len - 1), end)
}

fn luminance(img: &RgbImage) -> Vec<f32> {
    img.pixels()
        .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0)
        .collect()
}

/// Sobel gradient magnitude with replicated borders.
pub fn gradient_magnitude(img: &RgbImage) -> Vec<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let lum = luminance(img);
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        lum[yc * w + xc]
    };
    let mut out = vec![0.0f32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1) - at(x - 1, y - 1) - 2.0 * at(x - 1, y) - at(x - 1, y + 1);
            let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1) - at(x - 1, y - 1) - 2.0 * at(x, y - 1) - at(x + 1, y - 1);
            out[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Extract a `rows x cols x 4` feature map from a clothes crop.
pub fn extract_features(img: &RgbImage, rows: usize, cols: usize) -> FeatureMap {
    let (w, h) = (img.width() as usize, img.height() as usize);
    assert!(w > 0 && h > 0, "cannot extract features from an empty crop");
    let grad = gradient_magnitude(img);
    let mut values = Vec::with_capacity(rows * cols * FALLBACK_DIM);
    for r in 0..rows {
        let (y0, y1) = span(r, rows, h);
        for c in 0..cols {
            let (x0, x1) = span(c, cols, w);
            let mut acc = [0.0f64; FALLBACK_DIM];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = img.get_pixel(x as u32, y as u32);
                    acc[0] += p[0] as f64 / 255.0;
                    acc[1] += p[1] as f64 / 255.0;
                    acc[2] += p[2] as f64 / 255.0;
                    acc[3] += grad[y * w + x] as f64;
                }
            }
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            values.extend(acc.iter().map(|v| (v / n) as f32));
        }
    }
    FeatureMap::new(rows, cols, FALLBACK_DIM, values).expect("finite features")
}

/// The default 48x16 grid.
pub fn fallback_features(img: &RgbImage) -> FeatureMap {
    extract_features(img, GRID_ROWS, GRID_COLS)
}
