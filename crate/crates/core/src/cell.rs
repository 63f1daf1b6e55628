//! Homogeneous cloth cells: the block search on a feature grid, the mapping
//! of the chosen block back to image pixels, cell rescaling, and mirror
//! tiling of a cell over a canvas region.
//!
//! The search scores every square block `k` of the grid with
//! `R_k = mean_j(σ_j) / A_k`, where `σ_j` is the unbiased standard
//! deviation of channel `j` over the block's feature vectors and `A_k` the
//! block area in grid cells. The minimum wins; ties go to the larger block,
//! then the smaller row, then the smaller column.

use std::cmp::Ordering;

use image::RgbImage;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::FeatureMap;
use crate::imaging::resize_bilinear;
use crate::raster::{round_half_up, Mask, Rect};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellError {
    #[error("block ({row}, {col}) of side {side} leaves the {height}x{width} grid")]
    BlockOutOfBounds {
        row: usize,
        col: usize,
        side: usize,
        height: usize,
        width: usize,
    },
    #[error("block side {0} too small, need at least 2")]
    SideTooSmall(usize),
    #[error("{height}x{width} grid cannot hold a block of side {min_side}")]
    GridTooSmall { height: usize, width: usize, min_side: usize },
    #[error("cloth cell is empty")]
    EmptyCell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSelection {
    pub row: usize,
    pub col: usize,
    pub side: usize,
    pub area: usize,
    pub ratio: f64,
}

impl BlockSelection {
    /// Total search order: ratio, then larger area, then row, then col.
    pub fn search_order(&self, other: &Self) -> Ordering {
        self.ratio
            .total_cmp(&other.ratio)
            .then(other.area.cmp(&self.area))
            .then(self.row.cmp(&other.row))
            .then(self.col.cmp(&other.col))
    }
}

/// A patch cropped from a clothes image.
#[derive(Debug, Clone, PartialEq)]
pub struct ClothCell {
    pub pixels: RgbImage,
    pub source_rect: Rect,
}

/// Target size of a cell after rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScaledCellSpec {
    pub width: u32,
    pub height: u32,
}

/// Per-channel mean and unbiased standard deviation over a square block,
/// accumulated with Welford's update.
pub fn block_stats(f: &FeatureMap, row: usize, col: usize, side: usize) -> Result<BlockStats, CellError> {
    if side < 2 {
        return Err(CellError::SideTooSmall(side));
    }
    if row + side > f.height() || col + side > f.width() {
        return Err(CellError::BlockOutOfBounds {
            row,
            col,
            side,
            height: f.height(),
            width: f.width(),
        });
    }
    let d = f.dim();
    let mut mean = vec![0.0f64; d];
    let mut m2 = vec![0.0f64; d];
    let mut k = 0usize;
    for r in row..row + side {
        for c in col..col + side {
            k += 1;
            let inv = 1.0 / k as f64;
            for ((x, mu), acc) in f.at(r, c).iter().zip(mean.iter_mut()).zip(m2.iter_mut()) {
                let x = *x as f64;
                let delta = x - *mu;
                *mu += delta * inv;
                *acc += delta * (x - *mu);
            }
        }
    }
    let denom = (k - 1) as f64;
    let std = m2.iter().map(|v| (v.max(0.0) / denom).sqrt()).collect();
    Ok(BlockStats { mean, std, count: k })
}

fn check_grid(f: &FeatureMap, min_side: usize, max_side: usize) -> Result<usize, CellError> {
    if min_side < 2 {
        return Err(CellError::SideTooSmall(min_side));
    }
    if f.height() < min_side || f.width() < min_side {
        return Err(CellError::GridTooSmall {
            height: f.height(),
            width: f.width(),
            min_side,
        });
    }
    Ok(max_side.min(f.height()).min(f.width()))
}

/// Score of every block with side in `min_side..=max_side` at stride 1.
pub fn score_blocks(f: &FeatureMap, min_side: usize, max_side: usize) -> Result<Vec<BlockSelection>, CellError> {
    let max_side = check_grid(f, min_side, max_side)?;
    let per_side: Vec<Vec<BlockSelection>> = (min_side..=max_side.max(min_side))
        .into_par_iter()
        .map(|side| {
            let mut out = Vec::with_capacity((f.height() - side + 1) * (f.width() - side + 1));
            for row in 0..=f.height() - side {
                for col in 0..=f.width() - side {
                    let stats = block_stats(f, row, col, side).expect("block in range");
                    let mean_std = stats.std.iter().sum::<f64>() / stats.std.len() as f64;
                    let area = side * side;
                    out.push(BlockSelection {
                        row,
                        col,
                        side,
                        area,
                        ratio: mean_std / area as f64,
                    });
                }
            }
            out
        })
        .collect();
    Ok(per_side.into_iter().flatten().collect())
}

/// Exhaustive minimization of the homogeneity ratio.
pub fn find_homogeneous_cell(f: &FeatureMap, min_side: usize, max_side: usize) -> Result<BlockSelection, CellError> {
    let blocks = score_blocks(f, min_side, max_side)?;
    Ok(blocks.into_iter().min_by(|a, b| a.search_order(b)).expect("at least one block"))
}

/// Like [`find_homogeneous_cell`], but skips blocks with a nonzero
/// `penalty` (e.g. the fraction of blackened background they cover). When
/// every block is penalized, the smallest penalty wins, ties in search order.
pub fn find_homogeneous_cell_avoiding(
    f: &FeatureMap,
    min_side: usize,
    max_side: usize,
    penalty: impl Fn(&BlockSelection) -> f64,
) -> Result<BlockSelection, CellError> {
    let mut blocks = score_blocks(f, min_side, max_side)?;
    blocks.sort_by(|a, b| a.search_order(b));
    let mut fallback: Option<(f64, BlockSelection)> = None;
    for b in blocks {
        let p = penalty(&b);
        if p <= 0.0 {
            return Ok(b);
        }
        if fallback.is_none_or(|(best, _)| p < best) {
            fallback = Some((p, b));
        }
    }
    Ok(fallback.expect("at least one block").1)
}

/// Map a grid block onto pixels of `clothes_rect` by linear scaling.
pub fn block_to_image_rect(sel: &BlockSelection, grid: (usize, usize), clothes_rect: &Rect) -> Rect {
    let (gh, gw) = (grid.0 as f64, grid.1 as f64);
    let (rw, rh) = (clothes_rect.width as f64, clothes_rect.height as f64);
    let x = round_half_up(sel.col as f64 * rw / gw) as u32;
    let y = round_half_up(sel.row as f64 * rh / gh) as u32;
    let w = round_half_up(sel.side as f64 * rw / gw) as u32;
    let h = round_half_up(sel.side as f64 * rh / gh) as u32;
    let x = x.min(clothes_rect.width.saturating_sub(1));
    let y = y.min(clothes_rect.height.saturating_sub(1));
    let w = w.clamp(1, clothes_rect.width - x);
    let h = h.clamp(1, clothes_rect.height - y);
    Rect::new(clothes_rect.x + x, clothes_rect.y + y, w, h)
}

/// Rescale the cell so its texture matches the registered region:
/// `W_s = W_a / W_c * W_t` and `H_s = H_a / H_c * H_t`, rounded, at least 1.
pub fn scale_cell(cell_dims: (u32, u32), clothes_dims: (u32, u32), target_dims: (u32, u32)) -> ScaledCellSpec {
    let scale = |a: u32, c: u32, t: u32| {
        let v = round_half_up(a as f64 * t as f64 / c.max(1) as f64);
        (v as u32).max(1)
    };
    ScaledCellSpec {
        width: scale(cell_dims.0, clothes_dims.0, target_dims.0),
        height: scale(cell_dims.1, clothes_dims.1, target_dims.1),
    }
}

/// Source coordinate inside a mirror-tiled cell of length `len`: even tiles
/// are copied as-is, odd tiles mirrored.
#[inline]
pub fn mirror_index(pos: u32, len: u32) -> u32 {
    let tile = pos / len;
    let offset = pos % len;
    if tile.is_multiple_of(2) {
        offset
    } else {
        len - 1 - offset
    }
}

/// Fill `fill_region` of `canvas` by alternately flipping and tiling the
/// cell from the origin. With `spec`, the cell is first bilinearly resized.
/// Pixels outside the region are left untouched.
pub fn expand_cell(cell: &RgbImage, spec: Option<ScaledCellSpec>, canvas: &RgbImage, fill_region: &Mask) -> Result<RgbImage, CellError> {
    if cell.width() == 0 || cell.height() == 0 {
        return Err(CellError::EmptyCell);
    }
    let mut out = canvas.clone();
    if fill_region.is_empty() {
        log::warn!("expansion skipped: empty fill region");
        return Ok(out);
    }
    let tile = match spec {
        Some(s) => resize_bilinear(cell, s.width, s.height),
        None => cell.clone(),
    };
    let (tw, th) = tile.dimensions();
    for (x, y) in fill_region.iter_set() {
        if x < out.width() && y < out.height() {
            out.put_pixel(x, y, *tile.get_pixel(mirror_index(x, tw), mirror_index(y, th)));
        }
    }
    Ok(out)
}
