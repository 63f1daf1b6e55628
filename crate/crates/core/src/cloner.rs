//! Per-garment texture cloning onto UV templates and outfit composition.
//!
//! Regular templates get their parts registered by homography from the
//! masked garment crop; everything else on the canvas (and any part whose
//! fit failed) is filled by mirror-tiling a homogeneous cloth cell, rescaled
//! to the registered texture scale. Irregular templates are tiled with the
//! cell at its original size.

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cell::{
    block_to_image_rect, expand_cell, find_homogeneous_cell, find_homogeneous_cell_avoiding, scale_cell, CellError, ClothCell,
};
use crate::data::{FeatureMap, GarmentAnnotation, GarmentCategory, OutfitSlot};
use crate::features::fallback_features;
use crate::homography::{warp_parts, WarpPart};
use crate::imaging::{crop, BLACK};
use crate::raster::{polygon_area, Mask, Point2, Rect};
use crate::template::{PartView, TemplateKind, UvTemplate};

pub const MIN_POLYGON_AREA: f64 = 4.0;
pub const DEFAULT_SUSPECT_RMSE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CloneError {
    #[error("garment is {garment} but template {template_id} is {template}")]
    CategoryMismatch {
        garment: GarmentCategory,
        template: GarmentCategory,
        template_id: String,
    },
    #[error("template {0} has the wrong kind for this operation")]
    KindMismatch(String),
    #[error("garment polygon area {0:.2} px² is below {MIN_POLYGON_AREA}")]
    DegeneratePolygon(f64),
    #[error("garment box lies outside the image")]
    EmptyGarmentBox,
    #[error("template {0} declares no back-view parts")]
    MissingBackParts(String),
    #[error("cloth cell: {0}")]
    Cell(#[from] CellError),
    #[error("conflicting garments: {0}")]
    ConflictingGarments(String),
    #[error("no garments to compose")]
    NoGarments,
    #[error("results belong to different images ({0} and {1})")]
    MixedImages(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloneOptions {
    pub suspect_rmse: f64,
    pub min_block_side: usize,
    pub max_block_side: usize,
    /// Skip cloth cells that cover blackened background.
    pub avoid_black: bool,
}

impl Default for CloneOptions {
    fn default() -> Self {
        Self {
            suspect_rmse: DEFAULT_SUSPECT_RMSE,
            min_block_side: 2,
            max_block_side: usize::MAX,
            avoid_black: true,
        }
    }
}

/// One annotated garment in its photo.
#[derive(Debug, Clone, Copy)]
pub struct GarmentInput<'a> {
    pub image_id: &'a str,
    pub image: &'a RgbImage,
    pub garment: &'a GarmentAnnotation,
    pub features: Option<&'a FeatureMap>,
}

/// The garment box cropped from its photo with everything outside the
/// keypoint polygon set to black.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCrop {
    pub pixels: RgbImage,
    /// Pixels inside the garment polygon.
    pub inside: Mask,
    /// The crop's position in the photo.
    pub rect: Rect,
}

impl MaskedCrop {
    fn to_local(&self, p: Point2) -> Point2 {
        Point2::new(p.x - self.rect.x as f64, p.y - self.rect.y as f64)
    }
}

pub fn mask_garment(image: &RgbImage, g: &GarmentAnnotation) -> Result<MaskedCrop, CloneError> {
    let area = polygon_area(&g.keypoints).abs();
    if area < MIN_POLYGON_AREA {
        return Err(CloneError::DegeneratePolygon(area));
    }
    let rect = g
        .bbox
        .to_pixel_rect(image.width(), image.height())
        .ok_or(CloneError::EmptyGarmentBox)?;
    let mut pixels = crop(image, &rect);
    let local: Vec<Point2> = g
        .keypoints
        .iter()
        .map(|p| Point2::new(p.x - rect.x as f64, p.y - rect.y as f64))
        .collect();
    let inside = Mask::from_polygon(rect.width, rect.height, &local);
    for (x, y, px) in pixels.enumerate_pixels_mut() {
        if !inside.get(x, y) {
            *px = BLACK;
        }
    }
    Ok(MaskedCrop { pixels, inside, rect })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CloneMethod {
    #[serde(rename = "registered+expansion")]
    RegisteredExpansion,
    #[serde(rename = "expansion-only")]
    ExpansionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartReport {
    pub name: String,
    pub rmse: Option<f64>,
    pub suspect: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloneResult {
    pub image_id: String,
    pub category: GarmentCategory,
    pub template_id: String,
    pub uv_map: RgbImage,
    /// Canvas after registration only, before expansion.
    pub registered: RgbImage,
    /// Cloth cell position in the photo.
    pub cell_rect: Rect,
    pub parts: Vec<PartReport>,
    pub method: CloneMethod,
}

impl CloneResult {
    pub fn rmse(&self) -> Vec<Option<f64>> {
        self.parts.iter().map(|p| p.rmse).collect()
    }
}

fn check_template(g: &GarmentAnnotation, t: &UvTemplate, kind: TemplateKind) -> Result<(), CloneError> {
    if g.category != t.category {
        return Err(CloneError::CategoryMismatch {
            garment: g.category,
            template: t.category,
            template_id: t.template_id.clone(),
        });
    }
    if t.kind != kind {
        return Err(CloneError::KindMismatch(t.template_id.clone()));
    }
    Ok(())
}

/// Counts of outside-polygon pixels, for O(1) rectangle queries.
struct OutsideTable {
    width: usize,
    sums: Vec<u32>,
}

impl OutsideTable {
    fn new(inside: &Mask) -> Self {
        let (w, h) = (inside.width() as usize, inside.height() as usize);
        let mut sums = vec![0u32; (w + 1) * (h + 1)];
        for y in 0..h {
            for x in 0..w {
                let v = u32::from(!inside.get(x as u32, y as u32));
                sums[(y + 1) * (w + 1) + x + 1] = v + sums[y * (w + 1) + x + 1] + sums[(y + 1) * (w + 1) + x] - sums[y * (w + 1) + x];
            }
        }
        Self { width: w + 1, sums }
    }

    fn fraction(&self, r: &Rect) -> f64 {
        let (x0, y0, x1, y1) = (r.x as usize, r.y as usize, r.right() as usize, r.bottom() as usize);
        let s = |x: usize, y: usize| self.sums[y * self.width + x] as i64;
        let count = s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0);
        count as f64 / r.area().max(1) as f64
    }
}

/// Find the cloth cell on the masked crop. Returns the cell and its
/// rectangle in photo coordinates.
pub fn find_cloth_cell(masked: &MaskedCrop, features: Option<&FeatureMap>, options: &CloneOptions) -> Result<ClothCell, CloneError> {
    let owned;
    let f = match features {
        Some(f) => f,
        None => {
            owned = fallback_features(&masked.pixels);
            &owned
        }
    };
    let grid = (f.height(), f.width());
    let local_rect = Rect::new(0, 0, masked.rect.width, masked.rect.height);
    let sel = if options.avoid_black {
        let table = OutsideTable::new(&masked.inside);
        find_homogeneous_cell_avoiding(f, options.min_block_side, options.max_block_side, |b| {
            table.fraction(&block_to_image_rect(b, grid, &local_rect))
        })?
    } else {
        find_homogeneous_cell(f, options.min_block_side, options.max_block_side)?
    };
    let local = block_to_image_rect(&sel, grid, &local_rect);
    Ok(ClothCell {
        pixels: crop(&masked.pixels, &local),
        source_rect: Rect::new(masked.rect.x + local.x, masked.rect.y + local.y, local.width, local.height),
    })
}

fn warp_part_inputs<'t>(t: &'t UvTemplate, parts: &[usize], g: &GarmentAnnotation, masked: &MaskedCrop) -> Vec<WarpPart<'t>> {
    parts
        .iter()
        .map(|&i| {
            let part = &t.parts[i];
            WarpPart {
                name: part.name.clone(),
                target_points: part.uv_keypoints.clone(),
                source_points: part
                    .image_keypoint_indices
                    .iter()
                    .map(|&k| masked.to_local(g.keypoints[k]))
                    .collect(),
                mask: &part.mask,
            }
        })
        .collect()
}

struct Registration {
    canvas: RgbImage,
    reports: Vec<PartReport>,
    failed: Mask,
}

/// Warp the parts, each from the crop its view selects.
fn register(t: &UvTemplate, sources: &[(&GarmentAnnotation, &MaskedCrop, Vec<usize>)], options: &CloneOptions) -> Registration {
    let mut canvas = t.canvas_image();
    let mut reports: Vec<(usize, PartReport)> = Vec::new();
    let mut failed = Mask::new(t.canvas.0, t.canvas.1);
    for (g, masked, parts) in sources {
        let inputs = warp_part_inputs(t, parts, g, masked);
        let warped = warp_parts(&masked.pixels, &inputs, &canvas);
        canvas = warped.image;
        for (&i, outcome) in parts.iter().zip(warped.parts) {
            let report = match outcome.result {
                Ok(h) => PartReport {
                    name: outcome.name,
                    rmse: Some(h.rmse()),
                    suspect: h.rmse() > options.suspect_rmse,
                    error: None,
                },
                Err(e) => {
                    failed.union_with(&t.parts[i].mask);
                    PartReport {
                        name: outcome.name,
                        rmse: None,
                        suspect: false,
                        error: Some(e.to_string()),
                    }
                }
            };
            reports.push((i, report));
        }
    }
    reports.sort_by_key(|(i, _)| *i);
    Registration {
        canvas,
        reports: reports.into_iter().map(|(_, r)| r).collect(),
        failed,
    }
}

fn finish_regular(
    input: &GarmentInput<'_>,
    t: &UvTemplate,
    masked: &MaskedCrop,
    registration: Registration,
    options: &CloneOptions,
) -> Result<CloneResult, CloneError> {
    let cell = find_cloth_cell(masked, input.features, options)?;
    let target = t.target_extent().expect("regular templates have parts");
    let spec = scale_cell(cell.pixels.dimensions(), masked.pixels.dimensions(), (target.width, target.height));
    let mut fill = t.fill_region.clone();
    fill.union_with(&registration.failed);
    let uv_map = expand_cell(&cell.pixels, Some(spec), &registration.canvas, &fill)?;
    let any_registered = registration.reports.iter().any(|r| r.rmse.is_some());
    for r in registration.reports.iter().filter(|r| r.error.is_some()) {
        log::warn!(
            "{} {}: part {} falls back to expansion: {}",
            input.image_id,
            t.template_id,
            r.name,
            r.error.as_deref().unwrap_or_default()
        );
    }
    Ok(CloneResult {
        image_id: input.image_id.to_owned(),
        category: input.garment.category,
        template_id: t.template_id.clone(),
        uv_map,
        registered: registration.canvas,
        cell_rect: cell.source_rect,
        parts: registration.reports,
        method: if any_registered {
            CloneMethod::RegisteredExpansion
        } else {
            CloneMethod::ExpansionOnly
        },
    })
}

/// Registered mapping of every part plus expansion over the rest.
pub fn clone_regular(input: &GarmentInput<'_>, t: &UvTemplate, options: &CloneOptions) -> Result<CloneResult, CloneError> {
    check_template(input.garment, t, TemplateKind::Regular)?;
    let masked = mask_garment(input.image, input.garment)?;
    let all: Vec<usize> = (0..t.parts.len()).collect();
    let registration = register(t, &[(input.garment, &masked, all)], options);
    finish_regular(input, t, &masked, registration, options)
}

/// Front parts from the front photo, back parts from the back photo; the
/// remainder is expanded from the front photo's cloth cell.
pub fn clone_regular_multiview(
    front: &GarmentInput<'_>,
    back: &GarmentInput<'_>,
    t: &UvTemplate,
    options: &CloneOptions,
) -> Result<CloneResult, CloneError> {
    check_template(front.garment, t, TemplateKind::Regular)?;
    check_template(back.garment, t, TemplateKind::Regular)?;
    let (back_parts, front_parts): (Vec<usize>, Vec<usize>) = (0..t.parts.len()).partition(|&i| t.parts[i].view == PartView::Back);
    if back_parts.is_empty() {
        return Err(CloneError::MissingBackParts(t.template_id.clone()));
    }
    let front_masked = mask_garment(front.image, front.garment)?;
    let back_masked = mask_garment(back.image, back.garment)?;
    let registration = register(
        t,
        &[
            (front.garment, &front_masked, front_parts),
            (back.garment, &back_masked, back_parts),
        ],
        options,
    );
    finish_regular(front, t, &front_masked, registration, options)
}

/// Expansion of the cell at its original scale over the whole canvas.
pub fn clone_irregular(input: &GarmentInput<'_>, t: &UvTemplate, options: &CloneOptions) -> Result<CloneResult, CloneError> {
    check_template(input.garment, t, TemplateKind::Irregular)?;
    let masked = mask_garment(input.image, input.garment)?;
    let cell = find_cloth_cell(&masked, input.features, options)?;
    let canvas = t.canvas_image();
    let uv_map = expand_cell(&cell.pixels, None, &canvas, &t.fill_region)?;
    Ok(CloneResult {
        image_id: input.image_id.to_owned(),
        category: input.garment.category,
        template_id: t.template_id.clone(),
        uv_map,
        registered: canvas,
        cell_rect: cell.source_rect,
        parts: Vec::new(),
        method: CloneMethod::ExpansionOnly,
    })
}

/// Dispatch on the template kind.
pub fn clone_garment(input: &GarmentInput<'_>, t: &UvTemplate, options: &CloneOptions) -> Result<CloneResult, CloneError> {
    match t.kind {
        TemplateKind::Regular => clone_regular(input, t, options),
        TemplateKind::Irregular => clone_irregular(input, t, options),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutfitRecord {
    pub image_id: String,
    pub upper: Option<CloneResult>,
    pub lower: Option<CloneResult>,
    pub dress: Option<CloneResult>,
}

/// Slot categories present in an outfit, rejecting invalid combinations: a
/// dress excludes everything else and each slot holds one garment.
pub fn check_collocation(categories: &[GarmentCategory]) -> Result<(), CloneError> {
    if categories.is_empty() {
        return Err(CloneError::NoGarments);
    }
    let count = |slot| categories.iter().filter(|c| c.slot() == slot).count();
    let (upper, lower, dress) = (count(OutfitSlot::Upper), count(OutfitSlot::Lower), count(OutfitSlot::Dress));
    let names = || categories.iter().map(|c| c.name()).collect::<Vec<_>>().join(" + ");
    if dress > 0 && (upper + lower > 0 || dress > 1) || upper > 1 || lower > 1 {
        return Err(CloneError::ConflictingGarments(names()));
    }
    Ok(())
}

pub fn compose_outfit(records: Vec<CloneResult>) -> Result<OutfitRecord, CloneError> {
    let categories: Vec<GarmentCategory> = records.iter().map(|r| r.category).collect();
    check_collocation(&categories)?;
    let image_id = records[0].image_id.clone();
    if let Some(other) = records.iter().find(|r| r.image_id != image_id) {
        return Err(CloneError::MixedImages(image_id, other.image_id.clone()));
    }
    let mut outfit = OutfitRecord {
        image_id,
        upper: None,
        lower: None,
        dress: None,
    };
    for r in records {
        let slot = match r.category.slot() {
            OutfitSlot::Upper => &mut outfit.upper,
            OutfitSlot::Lower => &mut outfit.lower,
            OutfitSlot::Dress => &mut outfit.dress,
        };
        *slot = Some(r);
    }
    Ok(outfit)
}
