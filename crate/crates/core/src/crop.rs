//! Disturbance cropping: with probability ρ, remove random top, bottom and
//! side margins from a person image.

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::crop;
use crate::raster::Rect;

pub const MIN_CROP_INPUT: u32 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CropError {
    #[error("image {width}x{height} is smaller than {MIN_CROP_INPUT}x{MIN_CROP_INPUT}")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("crop policy field {field} = {value} outside [0, 1]")]
    InvalidPolicy { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropPolicy {
    pub probability: f64,
    pub side_rate: f64,
    pub top_max: f64,
    pub bottom_max: f64,
}

impl Default for CropPolicy {
    fn default() -> Self {
        Self {
            probability: 0.3,
            side_rate: 0.3,
            top_max: 0.1,
            bottom_max: 0.5,
        }
    }
}

impl CropPolicy {
    pub fn with_rates(probability: f64, side_rate: f64) -> Self {
        Self {
            probability,
            side_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CropError> {
        for (field, value) in [
            ("probability", self.probability),
            ("side_rate", self.side_rate),
            ("top_max", self.top_max),
            ("bottom_max", self.bottom_max),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CropError::InvalidPolicy { field, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideStrategy {
    Left,
    Right,
    Both,
}

/// Raw random draws, as fractions of the image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropDraws {
    pub cropped: bool,
    pub top: f64,
    pub bottom: f64,
    pub strategy: SideStrategy,
    pub left: f64,
    pub right: f64,
}

impl CropDraws {
    pub const NONE: CropDraws = CropDraws {
        cropped: false,
        top: 0.0,
        bottom: 0.0,
        strategy: SideStrategy::Both,
        left: 0.0,
        right: 0.0,
    };
}

/// Removed pixel amounts per side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropLog {
    pub image_id: String,
    pub cropped: bool,
    pub top: u32,
    pub bottom: u32,
    pub strategy: Option<SideStrategy>,
    pub left: u32,
    pub right: u32,
}

/// Draw order: crop decision, top, bottom, strategy, then one independent
/// side amount per selected side (left before right).
pub fn sample_draws<R: Rng + ?Sized>(policy: &CropPolicy, rng: &mut R) -> CropDraws {
    let u: f64 = rng.random();
    if u >= policy.probability {
        return CropDraws::NONE;
    }
    let top = rng.random::<f64>() * policy.top_max;
    let bottom = rng.random::<f64>() * policy.bottom_max;
    let strategy = match rng.random_range(0..3u8) {
        0 => SideStrategy::Left,
        1 => SideStrategy::Right,
        _ => SideStrategy::Both,
    };
    let mut side = || rng.random::<f64>() * policy.side_rate;
    let (left, right) = match strategy {
        SideStrategy::Left => (side(), 0.0),
        SideStrategy::Right => (0.0, side()),
        SideStrategy::Both => {
            let l = side();
            (l, side())
        }
    };
    CropDraws {
        cropped: true,
        top,
        bottom,
        strategy,
        left,
        right,
    }
}

/// Convert draws to a pixel rectangle. Amounts are floored, and shrunk so
/// at least one row and one column survive.
pub fn crop_rect(draws: &CropDraws, width: u32, height: u32) -> (Rect, [u32; 4]) {
    let px = |frac: f64, len: u32| ((frac * len as f64).floor() as u32).min(len);
    let mut top = px(draws.top, height);
    let mut bottom = px(draws.bottom, height);
    let mut left = px(draws.left, width);
    let mut right = px(draws.right, width);
    while top + bottom >= height {
        if bottom > 0 {
            bottom -= 1;
        } else {
            top -= 1;
        }
    }
    while left + right >= width {
        if right > 0 {
            right -= 1;
        } else {
            left -= 1;
        }
    }
    (
        Rect::new(left, top, width - left - right, height - top - bottom),
        [top, bottom, left, right],
    )
}

/// Pixel rectangle and log entry for `draws` on an image of `dims`.
pub fn plan_crop(image_id: &str, draws: &CropDraws, dims: (u32, u32)) -> Result<(Rect, CropLog), CropError> {
    let (w, h) = dims;
    if w < MIN_CROP_INPUT || h < MIN_CROP_INPUT {
        return Err(CropError::ImageTooSmall { width: w, height: h });
    }
    if !draws.cropped {
        let log = CropLog {
            image_id: image_id.to_owned(),
            cropped: false,
            top: 0,
            bottom: 0,
            strategy: None,
            left: 0,
            right: 0,
        };
        return Ok((Rect::new(0, 0, w, h), log));
    }
    let (rect, [top, bottom, left, right]) = crop_rect(draws, w, h);
    let log = CropLog {
        image_id: image_id.to_owned(),
        cropped: true,
        top,
        bottom,
        strategy: Some(draws.strategy),
        left,
        right,
    };
    Ok((rect, log))
}

pub fn apply_crop(image: &RgbImage, image_id: &str, draws: &CropDraws) -> Result<(RgbImage, CropLog), CropError> {
    let (rect, log) = plan_crop(image_id, draws, image.dimensions())?;
    let out = if log.cropped { crop(image, &rect) } else { image.clone() };
    Ok((out, log))
}

pub fn disturb_crop<R: Rng + ?Sized>(
    image: &RgbImage,
    image_id: &str,
    policy: &CropPolicy,
    rng: &mut R,
) -> Result<(RgbImage, CropLog), CropError> {
    policy.validate()?;
    let (w, h) = image.dimensions();
    if w < MIN_CROP_INPUT || h < MIN_CROP_INPUT {
        return Err(CropError::ImageTooSmall { width: w, height: h });
    }
    let draws = sample_draws(policy, rng);
    apply_crop(image, image_id, &draws)
}

/// (ρ, τ) rows of the ablation grid.
pub const SWEEP_GRID: [(f64, f64); 10] = [
    (0.0, 0.0),
    (0.1, 0.0),
    (0.2, 0.0),
    (0.3, 0.0),
    (0.4, 0.0),
    (0.5, 0.0),
    (0.3, 0.1),
    (0.3, 0.2),
    (0.3, 0.3),
    (0.3, 0.4),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropStats {
    pub n: usize,
    pub probability: f64,
    pub side_rate: f64,
    pub cropped: usize,
    pub cropped_fraction: f64,
    /// Largest removed amounts as fractions of the image size.
    pub max_top: f64,
    pub max_bottom: f64,
    pub max_left: f64,
    pub max_right: f64,
    /// Calls whose removed amounts broke a policy bound.
    pub bound_violations: usize,
}

/// Draw `n` crops of a `dims` image from per-item streams and summarize.
pub fn crop_statistics(policy: &CropPolicy, n: usize, seed: u64, stage: &str, dims: (u32, u32)) -> Result<CropStats, CropError> {
    policy.validate()?;
    let (w, h) = (dims.0 as f64, dims.1 as f64);
    let mut stats = CropStats {
        n,
        probability: policy.probability,
        side_rate: policy.side_rate,
        cropped: 0,
        cropped_fraction: 0.0,
        max_top: 0.0,
        max_bottom: 0.0,
        max_left: 0.0,
        max_right: 0.0,
        bound_violations: 0,
    };
    for i in 0..n {
        let id = format!("synthetic-{i:06}");
        let draws = sample_draws(policy, &mut crate::seed::item_rng(seed, stage, &id));
        let (rect, log) = plan_crop(&id, &draws, dims)?;
        stats.cropped += usize::from(log.cropped);
        let (top, bottom, left, right) = (log.top as f64 / h, log.bottom as f64 / h, log.left as f64 / w, log.right as f64 / w);
        stats.max_top = stats.max_top.max(top);
        stats.max_bottom = stats.max_bottom.max(bottom);
        stats.max_left = stats.max_left.max(left);
        stats.max_right = stats.max_right.max(right);
        let contiguous = rect.x == log.left
            && rect.y == log.top
            && rect.right() + log.right == dims.0
            && rect.bottom() + log.bottom == dims.1
            && !rect.is_empty();
        if top > policy.top_max || bottom > policy.bottom_max || left > policy.side_rate || right > policy.side_rate || !contiguous {
            stats.bound_violations += 1;
        }
    }
    stats.cropped_fraction = if n == 0 { 0.0 } else { stats.cropped as f64 / n as f64 };
    Ok(stats)
}
