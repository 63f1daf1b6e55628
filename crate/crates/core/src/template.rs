//! UV template descriptors and the template registry.
//!
//! A descriptor is a JSON file:
//!
//! ```json
//! {"template_id": "tee-01", "category": 2, "kind": "regular", "canvas": [256, 256],
//!  "parts": [{"name": "torso-front", "view": "front",
//!             "uv_keypoints": [[..]], "image_keypoint_indices": [..],
//!             "target_rect": [x, y, w, h], "mask_polygon": [[..]]}]}
//! ```
//!
//! An optional `<template_id>.png` next to the descriptor provides the base
//! canvas. Part masks are rasterized from their polygons on load.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::data::{GarmentCategory, KeypointSchema};
use crate::imaging::read_png;
use crate::raster::{Mask, Point2, Rect};

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {id}: {reason}")]
    DescriptorInvalid { id: String, reason: String },
    #[error("template {id}: canvas is {expected:?} but base image is {actual:?}")]
    CanvasSizeMismatch {
        id: String,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("no template for category {0}")]
    NoTemplateForCategory(GarmentCategory),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Regular,
    Irregular,
}

/// Which photo a registered part is pulled from when several views exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartView {
    #[default]
    Front,
    Back,
}

#[derive(Debug, Clone)]
pub struct UvPart {
    pub name: String,
    pub view: PartView,
    pub uv_keypoints: Vec<Point2>,
    pub image_keypoint_indices: Vec<usize>,
    pub target_rect: Rect,
    pub mask: Mask,
}

#[derive(Debug, Clone)]
pub struct UvTemplate {
    pub template_id: String,
    pub category: GarmentCategory,
    pub kind: TemplateKind,
    pub canvas: (u32, u32),
    pub parts: Vec<UvPart>,
    /// Union of the part masks.
    pub registered_region: Mask,
    /// Canvas minus the registered region (regular), whole canvas (irregular).
    pub fill_region: Mask,
    pub base: Option<RgbImage>,
}

impl UvTemplate {
    /// Base canvas, or black when the template ships none.
    pub fn canvas_image(&self) -> RgbImage {
        self.base.clone().unwrap_or_else(|| RgbImage::new(self.canvas.0, self.canvas.1))
    }

    /// Bounding box of all part target rectangles.
    pub fn target_extent(&self) -> Option<Rect> {
        self.parts.iter().map(|p| p.target_rect).reduce(|a, b| a.union(&b))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartDescriptor {
    name: String,
    #[serde(default)]
    view: PartView,
    uv_keypoints: Vec<[f64; 2]>,
    image_keypoint_indices: Vec<usize>,
    target_rect: [u32; 4],
    mask_polygon: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDescriptor {
    template_id: String,
    category: u8,
    kind: TemplateKind,
    canvas: [u32; 2],
    #[serde(default)]
    parts: Vec<PartDescriptor>,
}

/// Parse and validate a descriptor. `base` is the optional base canvas.
pub fn parse_template(json: &str, schema: &KeypointSchema, base: Option<RgbImage>) -> Result<UvTemplate, TemplateError> {
    let desc: TemplateDescriptor = serde_json::from_str(json).map_err(|e| TemplateError::DescriptorInvalid {
        id: "<unparsed>".into(),
        reason: e.to_string(),
    })?;
    let id = desc.template_id.clone();
    let invalid = |reason: String| TemplateError::DescriptorInvalid { id: id.clone(), reason };
    if id.is_empty() || id.contains(['/', '\\']) {
        return Err(invalid("template_id must be a non-empty file-safe name".into()));
    }
    let category = GarmentCategory::from_id(desc.category).ok_or_else(|| invalid(format!("category {} not in 1..=8", desc.category)))?;
    let [w, h] = desc.canvas;
    if w == 0 || h == 0 {
        return Err(invalid("empty canvas".into()));
    }
    if let Some(img) = &base {
        if img.dimensions() != (w, h) {
            return Err(TemplateError::CanvasSizeMismatch {
                id,
                expected: (w, h),
                actual: img.dimensions(),
            });
        }
    }
    match desc.kind {
        TemplateKind::Regular if desc.parts.is_empty() => return Err(invalid("regular template needs at least one part".into())),
        TemplateKind::Irregular if !desc.parts.is_empty() => return Err(invalid("irregular template must not declare parts".into())),
        _ => {}
    }

    let schema_count = schema.count(category);
    let canvas_rect = Rect::new(0, 0, w, h);
    let mut registered_region = Mask::new(w, h);
    let mut parts = Vec::with_capacity(desc.parts.len());
    for pd in desc.parts {
        let name = pd.name.clone();
        if pd.uv_keypoints.len() != pd.image_keypoint_indices.len() {
            return Err(invalid(format!(
                "part {name}: {} uv keypoints vs {} indices",
                pd.uv_keypoints.len(),
                pd.image_keypoint_indices.len()
            )));
        }
        if pd.uv_keypoints.len() < 4 {
            return Err(invalid(format!(
                "part {name}: {} keypoints, need at least 4",
                pd.uv_keypoints.len()
            )));
        }
        if let Some(bad) = pd.image_keypoint_indices.iter().find(|i| **i >= schema_count) {
            return Err(invalid(format!(
                "part {name}: keypoint index {bad} outside {category} schema of {schema_count}"
            )));
        }
        let [rx, ry, rw, rh] = pd.target_rect;
        let target_rect = Rect::new(rx, ry, rw, rh);
        if target_rect.is_empty() || !canvas_rect.contains_rect(&target_rect) {
            return Err(invalid(format!("part {name}: target_rect outside canvas")));
        }
        let polygon: Vec<Point2> = pd.mask_polygon.iter().map(|[x, y]| Point2::new(*x, *y)).collect();
        let mask = Mask::from_polygon(w, h, &polygon);
        if mask.is_empty() {
            return Err(invalid(format!("part {name}: mask polygon covers no pixel")));
        }
        if mask.iter_set().any(|(x, y)| !target_rect.contains(x, y)) {
            return Err(invalid(format!("part {name}: mask leaves target_rect")));
        }
        if mask.intersects(&registered_region) {
            return Err(invalid(format!("part {name}: mask overlaps another part")));
        }
        registered_region.union_with(&mask);
        parts.push(UvPart {
            name,
            view: pd.view,
            uv_keypoints: pd.uv_keypoints.iter().map(|[x, y]| Point2::new(*x, *y)).collect(),
            image_keypoint_indices: pd.image_keypoint_indices,
            target_rect,
            mask,
        });
    }
    let fill_region = match desc.kind {
        TemplateKind::Regular => registered_region.complement(),
        TemplateKind::Irregular => Mask::full(w, h),
    };
    Ok(UvTemplate {
        template_id: id,
        category,
        kind: desc.kind,
        canvas: (w, h),
        parts,
        registered_region,
        fill_region,
        base,
    })
}

/// Templates keyed by id.
#[derive(Debug, Clone, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, UvTemplate>,
}

impl TemplateRegistry {
    pub fn new(templates: impl IntoIterator<Item = UvTemplate>) -> Result<Self, TemplateError> {
        let mut map = BTreeMap::new();
        for t in templates {
            let id = t.template_id.clone();
            if map.insert(id.clone(), t).is_some() {
                return Err(TemplateError::DescriptorInvalid {
                    id,
                    reason: "duplicate template_id".into(),
                });
            }
        }
        Ok(Self { templates: map })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&UvTemplate> {
        self.templates.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &UvTemplate> {
        self.templates.values()
    }

    /// Templates of one category, ordered by id.
    pub fn for_category(&self, category: GarmentCategory) -> Vec<&UvTemplate> {
        self.templates.values().filter(|t| t.category == category).collect()
    }

    pub fn count_by_kind(&self) -> (usize, usize) {
        let regular = self.iter().filter(|t| t.kind == TemplateKind::Regular).count();
        (regular, self.len() - regular)
    }

    pub fn missing_categories(&self) -> Vec<GarmentCategory> {
        GarmentCategory::ALL
            .into_iter()
            .filter(|c| self.for_category(*c).is_empty())
            .collect()
    }
}

/// Load every `*.json` descriptor in `dir`.
pub fn load_templates(dir: &Path, schema: &KeypointSchema) -> Result<TemplateRegistry, TemplateError> {
    let unreadable = |path: &Path, e: &dyn std::fmt::Display| TemplateError::Unreadable {
        path: path.to_owned(),
        reason: e.to_string(),
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| unreadable(dir, &e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let mut templates = Vec::with_capacity(paths.len());
    for path in paths {
        let json = fs::read_to_string(&path).map_err(|e| unreadable(&path, &e))?;
        let png = path.with_extension("png");
        let base = if png.exists() {
            Some(read_png(&png).map_err(|e| unreadable(&png, &e))?)
        } else {
            None
        };
        templates.push(parse_template(&json, schema, base)?);
    }
    let registry = TemplateRegistry::new(templates)?;
    for missing in registry.missing_categories() {
        log::warn!("no UV template for category {missing}");
    }
    Ok(registry)
}

/// Uniform choice among the category's templates.
pub fn select_template<'a, R: Rng + ?Sized>(
    category: GarmentCategory,
    registry: &'a TemplateRegistry,
    rng: &mut R,
) -> Result<&'a UvTemplate, TemplateError> {
    let candidates = registry.for_category(category);
    if candidates.is_empty() {
        return Err(TemplateError::NoTemplateForCategory(category));
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}
