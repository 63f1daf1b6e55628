//! Frontal-area probing: find which UV pixels show up in a frontal render.
//!
//! A reference view is rendered from an all-black UV canvas. A white square
//! is then moved over the canvas on a stride grid; every placement whose
//! render differs from the reference by a mean absolute difference above
//! the threshold marks its square. The union of marked squares is the
//! frontal mask.

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::raster::{Mask, Rect};

/// Renders a UV canvas to a fixed-size view.
pub trait RenderOracle: Sync {
    fn render(&self, uv: &RgbImage) -> Result<RgbImage, String>;

    /// Whether `render` may be called from several threads at once.
    fn is_reentrant(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error("oracle failed at placement ({x}, {y}): {reason}")]
    OracleFailure { x: u32, y: u32, reason: String },
    #[error("invalid probe configuration: {0}")]
    InvalidConfig(String),
}

pub const DEFAULT_SQUARE: u32 = 50;
/// Mean absolute difference, in 0..=255 units, above which a placement responds.
pub const DEFAULT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub square: u32,
    pub stride: u32,
    pub threshold: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            square: DEFAULT_SQUARE,
            stride: DEFAULT_SQUARE / 2,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// UV pixels that render into the frontal view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontalMask(pub Mask);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub rect: Rect,
    pub response: f64,
    pub fired: bool,
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub mask: FrontalMask,
    pub placements: Vec<Placement>,
}

/// Square origins along one axis: a stride grid whose last placement is
/// clamped to the canvas edge.
pub fn placement_origins(len: u32, square: u32, stride: u32) -> Vec<u32> {
    if len <= square {
        return vec![0];
    }
    let last = len - square;
    let mut out: Vec<u32> = (0..=last).step_by(stride as usize).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    out
}

/// Mean absolute per-channel difference in 0..=255 units.
pub fn mean_abs_diff(a: &RgbImage, b: &RgbImage) -> f64 {
    let total: u64 = a.as_raw().iter().zip(b.as_raw()).map(|(x, y)| x.abs_diff(*y) as u64).sum();
    total as f64 / a.as_raw().len().max(1) as f64
}

pub fn probe_frontal_area(oracle: &dyn RenderOracle, canvas: (u32, u32), config: ProbeConfig) -> Result<ProbeReport, ProbeError> {
    let (w, h) = canvas;
    if config.square == 0 || config.stride == 0 || config.stride > config.square {
        return Err(ProbeError::InvalidConfig(format!(
            "need 0 < stride <= square, got stride {} square {}",
            config.stride, config.square
        )));
    }
    if w == 0 || h == 0 {
        return Err(ProbeError::InvalidConfig("empty canvas".into()));
    }
    let black = RgbImage::new(w, h);
    let reference = oracle
        .render(&black)
        .map_err(|reason| ProbeError::OracleFailure { x: 0, y: 0, reason })?;

    let rects: Vec<Rect> = placement_origins(h, config.square, config.stride)
        .into_iter()
        .flat_map(|y| {
            placement_origins(w, config.square, config.stride)
                .into_iter()
                .map(move |x| Rect::new(x, y, config.square.min(w - x), config.square.min(h - y)))
        })
        .collect();

    let respond = |canvas: &mut RgbImage, rect: &Rect| -> Result<Placement, ProbeError> {
        paint(canvas, rect, Rgb([255, 255, 255]));
        let rendered = oracle.render(canvas);
        paint(canvas, rect, Rgb([0, 0, 0]));
        let view = rendered.map_err(|reason| ProbeError::OracleFailure {
            x: rect.x,
            y: rect.y,
            reason,
        })?;
        if view.dimensions() != reference.dimensions() {
            return Err(ProbeError::OracleFailure {
                x: rect.x,
                y: rect.y,
                reason: "view size changed between renders".into(),
            });
        }
        let response = mean_abs_diff(&view, &reference);
        Ok(Placement {
            rect: *rect,
            response,
            fired: response > config.threshold,
        })
    };

    let placements: Vec<Placement> = if oracle.is_reentrant() {
        rects
            .par_iter()
            .map_init(|| black.clone(), |canvas, rect| respond(canvas, rect))
            .collect::<Result<_, _>>()?
    } else {
        let mut canvas = black.clone();
        rects.iter().map(|rect| respond(&mut canvas, rect)).collect::<Result<_, _>>()?
    };

    let mut mask = Mask::new(w, h);
    for p in placements.iter().filter(|p| p.fired) {
        mask.fill_rect(&p.rect);
    }
    Ok(ProbeReport {
        mask: FrontalMask(mask),
        placements,
    })
}

fn paint(img: &mut RgbImage, rect: &Rect, color: Rgb<u8>) {
    for y in rect.y..rect.bottom() {
        for x in rect.x..rect.right() {
            img.put_pixel(x, y, color);
        }
    }
}

/// Synthetic renderer whose view is the UV rectangle `rect`, sampled every
/// `step` pixels (nearest neighbor at each step cell's center).
#[derive(Debug, Clone, Copy)]
pub struct CropOracle {
    pub rect: Rect,
    pub step: u32,
}

impl CropOracle {
    pub fn new(rect: Rect) -> Self {
        Self { rect, step: 1 }
    }

    pub fn with_step(rect: Rect, step: u32) -> Self {
        Self { rect, step: step.max(1) }
    }
}

impl RenderOracle for CropOracle {
    fn render(&self, uv: &RgbImage) -> Result<RgbImage, String> {
        let r = self.rect;
        if r.right() > uv.width() || r.bottom() > uv.height() {
            return Err(format!("crop {r:?} outside {:?} canvas", uv.dimensions()));
        }
        let s = self.step;
        let vw = r.width.div_ceil(s);
        let vh = r.height.div_ceil(s);
        Ok(RgbImage::from_fn(vw, vh, |i, j| {
            let x = (r.x + i * s + s / 2).min(r.right() - 1);
            let y = (r.y + j * s + s / 2).min(r.bottom() - 1);
            *uv.get_pixel(x, y)
        }))
    }
}
