//! Detection gating and rule-based view qualification.
//!
//! Rules run in order and the first that fires decides the label:
//! 1. right shoulder to the right of the left shoulder: back view;
//! 2. shoulder width over torso height below 0.3: side view;
//! 3. an elbow or hand inside the horizontally widened upper or lower body
//!    quad: occluded.

use serde::{Deserialize, Serialize};

use crate::data::{coco, PersonRecord, PoseKeypoints};
use crate::raster::{convex_hull, point_in_convex_hull, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewLabel {
    Qualified,
    BackView,
    SideView,
    Occluded,
    DetectionRejected,
}

impl ViewLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewLabel::Qualified => "qualified",
            ViewLabel::BackView => "back_view",
            ViewLabel::SideView => "side_view",
            ViewLabel::Occluded => "occluded",
            ViewLabel::DetectionRejected => "detection_rejected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ViewMetrics {
    pub detection_score: Option<f64>,
    pub area_fraction: Option<f64>,
    /// P6.x − P5.x
    pub shoulder_dx: Option<f64>,
    pub aspect_ratio: Option<f64>,
    pub offending_point: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViewVerdict {
    pub label: ViewLabel,
    pub metrics: ViewMetrics,
    /// Set when the torso height vanished and the side-view label was forced.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseConfig {
    pub min_detection_score: f64,
    pub min_area_fraction: f64,
    pub min_aspect_ratio: f64,
    pub quad_expansion: f64,
    /// When set, elbows and hands below this visibility are ignored by the
    /// occlusion rule. Off by default.
    pub min_limb_visibility: Option<f64>,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            min_detection_score: 0.8,
            min_area_fraction: 0.20,
            min_aspect_ratio: 0.3,
            quad_expansion: 0.1,
            min_limb_visibility: None,
        }
    }
}

pub const MIN_TORSO_HEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateOutcome {
    pub pass: bool,
    pub detection_score: f64,
    pub area_fraction: f64,
}

/// Both thresholds are inclusive.
pub fn gate_detection(r: &PersonRecord, image_dims: (u32, u32), config: &PoseConfig) -> GateOutcome {
    let image_area = image_dims.0 as f64 * image_dims.1 as f64;
    let area_fraction = if image_area > 0.0 { r.person_bbox.area() / image_area } else { 0.0 };
    GateOutcome {
        pass: r.detection_score >= config.min_detection_score && area_fraction >= config.min_area_fraction,
        detection_score: r.detection_score,
        area_fraction,
    }
}

/// Quad widened horizontally by `margin` on each side: the hull of its
/// corners shifted left and right.
fn widened_hull(corners: &[Point2], margin: f64) -> Vec<Point2> {
    let shifted: Vec<Point2> = corners
        .iter()
        .flat_map(|p| [Point2::new(p.x - margin, p.y), Point2::new(p.x + margin, p.y)])
        .collect();
    convex_hull(&shifted)
}

pub fn classify_view(pose: &PoseKeypoints, config: &PoseConfig) -> ViewVerdict {
    let p = |i| pose.point(i);
    let (ls, rs, lh, rh) = (
        p(coco::LEFT_SHOULDER),
        p(coco::RIGHT_SHOULDER),
        p(coco::LEFT_HIP),
        p(coco::RIGHT_HIP),
    );
    let mut metrics = ViewMetrics::default();
    let verdict = |label, metrics, degenerate| ViewVerdict {
        label,
        metrics,
        degenerate,
    };

    let dx = rs.x - ls.x;
    metrics.shoulder_dx = Some(dx);
    if dx > 0.0 {
        return verdict(ViewLabel::BackView, metrics, false);
    }

    let w = ls.distance(&rs);
    let h = ls.midpoint(&rs).distance(&lh.midpoint(&rh));
    if h < MIN_TORSO_HEIGHT {
        return verdict(ViewLabel::SideView, metrics, true);
    }
    let ratio = w / h;
    metrics.aspect_ratio = Some(ratio);
    if ratio < config.min_aspect_ratio {
        return verdict(ViewLabel::SideView, metrics, false);
    }

    let w1 = w;
    let w2 = lh.distance(&rh);
    let upper = widened_hull(&[rs, ls, lh, rh], config.quad_expansion * w1);
    let lower = widened_hull(&[rh, lh, p(coco::LEFT_KNEE), p(coco::RIGHT_KNEE)], config.quad_expansion * w2);
    // Boundary tolerance follows the pose scale so the rule is scale-free.
    let tol = 1e-9 * (w1 + w2 + h);
    let limbs = [coco::LEFT_ELBOW, coco::RIGHT_ELBOW, coco::LEFT_WRIST, coco::RIGHT_WRIST];
    for i in limbs {
        if let Some(min_vis) = config.min_limb_visibility {
            if pose.points[i].visibility < min_vis {
                continue;
            }
        }
        let q = p(i);
        if point_in_convex_hull(&q, &upper, tol) || point_in_convex_hull(&q, &lower, tol) {
            metrics.offending_point = Some(i);
            return verdict(ViewLabel::Occluded, metrics, false);
        }
    }
    verdict(ViewLabel::Qualified, metrics, false)
}

/// Detection gate followed by the view rules.
pub fn qualify_record(r: &PersonRecord, image_dims: (u32, u32), config: &PoseConfig) -> ViewVerdict {
    let gate = gate_detection(r, image_dims, config);
    if !gate.pass {
        return ViewVerdict {
            label: ViewLabel::DetectionRejected,
            metrics: ViewMetrics {
                detection_score: Some(gate.detection_score),
                area_fraction: Some(gate.area_fraction),
                ..ViewMetrics::default()
            },
            degenerate: false,
        };
    }
    let mut v = classify_view(&r.pose, config);
    v.metrics.detection_score = Some(gate.detection_score);
    v.metrics.area_fraction = Some(gate.area_fraction);
    v
}
