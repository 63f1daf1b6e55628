//! Domain records and the on-disk formats they are read from and written to.
//!
//! * Person corpus: JSON lines, one [`PersonRecord`] per line.
//! * Feature maps: `FMAP` + `u32` height, width, dim (LE) + `f32` payload
//!   (LE, row-major, channel-fastest).
//! * Distance matrices: `DMAT` + `u32` n (LE) + `n*n` `f32` payload (LE,
//!   row-major).
//!
//! Loaders validate every record before anything downstream sees it. Bad
//! corpus lines are skipped and reported; binary files fail as a whole.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::raster::{BBox, Point2};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: field `{field}`: {reason}")]
    SchemaViolation { line: usize, field: String, reason: String },
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("distance matrix asymmetric at ({i}, {j}) by {diff}")]
    AsymmetryTooLarge { i: usize, j: usize, diff: f64 },
    #[error("negative distance at ({i}, {j})")]
    NegativeDistance { i: usize, j: usize },
    #[error("invalid keypoint schema: {0}")]
    InvalidSchema(String),
}

/// Garment categories in annotation-id order (1..=8).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GarmentCategory {
    LongSleeves,
    ShortSleeves,
    Sleeveless,
    Trousers,
    Shorts,
    Skirt,
    ShortDress,
    LongDress,
}

/// Outfit slot a garment occupies on a character.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutfitSlot {
    Upper,
    Lower,
    Dress,
}

impl GarmentCategory {
    pub const ALL: [GarmentCategory; 8] = [
        GarmentCategory::LongSleeves,
        GarmentCategory::ShortSleeves,
        GarmentCategory::Sleeveless,
        GarmentCategory::Trousers,
        GarmentCategory::Shorts,
        GarmentCategory::Skirt,
        GarmentCategory::ShortDress,
        GarmentCategory::LongDress,
    ];

    pub fn from_id(id: u8) -> Option<Self> {
        (1..=8).contains(&id).then(|| Self::ALL[id as usize - 1])
    }

    pub fn id(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            GarmentCategory::LongSleeves => "long-sleeves",
            GarmentCategory::ShortSleeves => "short-sleeves",
            GarmentCategory::Sleeveless => "sleeveless",
            GarmentCategory::Trousers => "trousers",
            GarmentCategory::Shorts => "shorts",
            GarmentCategory::Skirt => "skirt",
            GarmentCategory::ShortDress => "short-dress",
            GarmentCategory::LongDress => "long-dress",
        }
    }

    pub fn slot(self) -> OutfitSlot {
        use GarmentCategory::*;
        match self {
            LongSleeves | ShortSleeves | Sleeveless => OutfitSlot::Upper,
            Trousers | Shorts | Skirt => OutfitSlot::Lower,
            ShortDress | LongDress => OutfitSlot::Dress,
        }
    }
}

impl fmt::Display for GarmentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Minimum keypoints per category; a homography needs four.
pub const MIN_SCHEMA_KEYPOINTS: usize = 4;

/// Per-category clothes keypoint layout. The keypoint order doubles as the
/// garment outline winding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeypointSchema {
    names: [Vec<String>; 8],
}

#[derive(Deserialize)]
struct SchemaFile {
    categories: Vec<SchemaEntry>,
}

#[derive(Deserialize)]
struct SchemaEntry {
    id: u8,
    #[allow(dead_code)]
    name: String,
    keypoints: Vec<String>,
}

impl KeypointSchema {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|e| DataError::InvalidSchema(e.to_string()))?;
        let mut names: [Option<Vec<String>>; 8] = Default::default();
        for entry in file.categories {
            let cat = GarmentCategory::from_id(entry.id).ok_or_else(|| DataError::InvalidSchema(format!("category id {}", entry.id)))?;
            if entry.keypoints.len() < MIN_SCHEMA_KEYPOINTS {
                return Err(DataError::InvalidSchema(format!(
                    "{cat} declares {} keypoints, need at least {MIN_SCHEMA_KEYPOINTS}",
                    entry.keypoints.len()
                )));
            }
            if names[cat as usize].replace(entry.keypoints).is_some() {
                return Err(DataError::InvalidSchema(format!("{cat} declared twice")));
            }
        }
        let mut out: [Vec<String>; 8] = Default::default();
        for (i, slot) in names.into_iter().enumerate() {
            out[i] = slot.ok_or_else(|| DataError::InvalidSchema(format!("missing {}", GarmentCategory::ALL[i])))?;
        }
        Ok(Self { names: out })
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::FileUnreadable {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn count(&self, category: GarmentCategory) -> usize {
        self.names[category as usize].len()
    }

    pub fn names(&self, category: GarmentCategory) -> &[String] {
        &self.names[category as usize]
    }
}

impl Default for KeypointSchema {
    fn default() -> Self {
        Self::from_json(include_str!("../data/keypoint_schema.json")).expect("bundled keypoint schema is valid")
    }
}

pub const POSE_KEYPOINTS: usize = 17;

/// COCO body keypoint indices used by the view rules.
pub mod coco {
    pub const LEFT_SHOULDER: usize = 5;
    pub const RIGHT_SHOULDER: usize = 6;
    pub const LEFT_ELBOW: usize = 7;
    pub const RIGHT_ELBOW: usize = 8;
    pub const LEFT_WRIST: usize = 9;
    pub const RIGHT_WRIST: usize = 10;
    pub const LEFT_HIP: usize = 11;
    pub const RIGHT_HIP: usize = 12;
    pub const LEFT_KNEE: usize = 13;
    pub const RIGHT_KNEE: usize = 14;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub pos: Point2,
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseKeypoints {
    pub points: [Keypoint; POSE_KEYPOINTS],
}

impl PoseKeypoints {
    pub fn point(&self, index: usize) -> Point2 {
        self.points[index].pos
    }

    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> PoseKeypoints {
        let mut out = self.clone();
        for kp in out.points.iter_mut() {
            kp.pos = f(kp.pos);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarmentAnnotation {
    pub category: GarmentCategory,
    pub bbox: BBox,
    pub keypoints: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonRecord {
    pub image_id: String,
    pub image_path: String,
    pub detection_score: f64,
    pub person_bbox: BBox,
    pub pose: PoseKeypoints,
    pub garments: Vec<GarmentAnnotation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGarment {
    category: u8,
    bbox: [f64; 4],
    keypoints: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct RawRecord<'a> {
    image_id: &'a str,
    image_path: &'a str,
    detection_score: f64,
    person_bbox: [f64; 4],
    pose: Vec<[f64; 3]>,
    garments: Vec<RawGarment>,
}

const RECORD_FIELDS: [&str; 6] = ["image_id", "image_path", "detection_score", "person_bbox", "pose", "garments"];

fn bbox_array(b: &BBox) -> [f64; 4] {
    [b.x, b.y, b.w, b.h]
}

impl PersonRecord {
    /// Canonical single-line JSON encoding (no trailing newline).
    pub fn to_json_line(&self) -> String {
        let raw = RawRecord {
            image_id: &self.image_id,
            image_path: &self.image_path,
            detection_score: self.detection_score,
            person_bbox: bbox_array(&self.person_bbox),
            pose: self.pose.points.iter().map(|k| [k.pos.x, k.pos.y, k.visibility]).collect(),
            garments: self
                .garments
                .iter()
                .map(|g| RawGarment {
                    category: g.category.id(),
                    bbox: bbox_array(&g.bbox),
                    keypoints: g.keypoints.iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("record serializes")
    }

    /// Parse and structurally validate one corpus line. Image-bound checks
    /// happen separately in [`validate_record`] because they need the image.
    pub fn from_json_line(text: &str, line: usize, schema: &KeypointSchema) -> Result<Self, DataError> {
        let violation = |field: &str, reason: String| DataError::SchemaViolation {
            line,
            field: field.to_owned(),
            reason,
        };
        let value: Value = serde_json::from_str(text).map_err(|e| violation("<record>", e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(violation("<record>", "not a JSON object".into()));
        };
        if let Some(extra) = obj.keys().find(|k| !RECORD_FIELDS.contains(&k.as_str())) {
            return Err(violation(extra, "unknown field".into()));
        }
        fn field<T: serde::de::DeserializeOwned>(obj: &Map<String, Value>, name: &str) -> Result<T, String> {
            let v = obj.get(name).ok_or_else(|| "missing".to_string())?;
            T::deserialize(v).map_err(|e| e.to_string())
        }

        let image_id: String = field(&obj, "image_id").map_err(|r| violation("image_id", r))?;
        if image_id.is_empty() {
            return Err(violation("image_id", "empty".into()));
        }
        let image_path: String = field(&obj, "image_path").map_err(|r| violation("image_path", r))?;
        let detection_score: f64 = field(&obj, "detection_score").map_err(|r| violation("detection_score", r))?;
        if !(0.0..=1.0).contains(&detection_score) {
            return Err(violation("detection_score", "outside [0, 1]".into()));
        }
        let bbox: [f64; 4] = field(&obj, "person_bbox").map_err(|r| violation("person_bbox", r))?;
        let person_bbox = BBox::new(bbox[0], bbox[1], bbox[2], bbox[3]);
        if !person_bbox.is_finite() || person_bbox.w <= 0.0 || person_bbox.h <= 0.0 {
            return Err(violation("person_bbox", "non-positive or non-finite".into()));
        }

        let pose_raw: Vec<[f64; 3]> = field(&obj, "pose").map_err(|r| violation("pose", r))?;
        if pose_raw.len() != POSE_KEYPOINTS {
            return Err(violation(
                "pose",
                format!("expected {POSE_KEYPOINTS} keypoints, got {}", pose_raw.len()),
            ));
        }
        let mut points = [Keypoint::default(); POSE_KEYPOINTS];
        for (i, [x, y, v]) in pose_raw.into_iter().enumerate() {
            let pos = Point2::new(x, y);
            if !pos.is_finite() {
                return Err(violation("pose", format!("keypoint {i} non-finite")));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(violation("pose", format!("visibility {i} outside [0, 1]")));
            }
            points[i] = Keypoint { pos, visibility: v };
        }

        let garments_raw: Vec<RawGarment> = field(&obj, "garments").map_err(|r| violation("garments", r))?;
        let mut garments = Vec::with_capacity(garments_raw.len());
        for (gi, g) in garments_raw.into_iter().enumerate() {
            let category = GarmentCategory::from_id(g.category)
                .ok_or_else(|| violation(&format!("garments[{gi}].category"), format!("{} not in 1..=8", g.category)))?;
            let bbox = BBox::new(g.bbox[0], g.bbox[1], g.bbox[2], g.bbox[3]);
            if !bbox.is_finite() || bbox.w <= 0.0 || bbox.h <= 0.0 {
                return Err(violation(&format!("garments[{gi}].bbox"), "non-positive or non-finite".into()));
            }
            let expected = schema.count(category);
            if g.keypoints.len() != expected {
                return Err(violation(
                    &format!("garments[{gi}].keypoints"),
                    format!("{category} needs {expected} keypoints, got {}", g.keypoints.len()),
                ));
            }
            let keypoints: Vec<Point2> = g.keypoints.iter().map(|[x, y]| Point2::new(*x, *y)).collect();
            if keypoints.iter().any(|p| !p.is_finite()) {
                return Err(violation(&format!("garments[{gi}].keypoints"), "non-finite".into()));
            }
            garments.push(GarmentAnnotation { category, bbox, keypoints });
        }

        Ok(PersonRecord {
            image_id,
            image_path,
            detection_score,
            person_bbox,
            pose: PoseKeypoints { points },
            garments,
        })
    }
}

/// Check a record against its image dimensions and the keypoint schema.
pub fn validate_record(record: &PersonRecord, schema: &KeypointSchema, image_dims: (u32, u32)) -> Result<(), DataError> {
    let violation = |field: &str, reason: String| DataError::SchemaViolation {
        line: 0,
        field: field.to_owned(),
        reason,
    };
    let (w, h) = (image_dims.0 as f64, image_dims.1 as f64);
    if !(0.0..=1.0).contains(&record.detection_score) {
        return Err(violation("detection_score", "outside [0, 1]".into()));
    }
    let b = &record.person_bbox;
    if b.x < 0.0 || b.y < 0.0 || b.x + b.w > w || b.y + b.h > h {
        return Err(violation("person_bbox", format!("outside {w}x{h} image")));
    }
    for (i, kp) in record.pose.points.iter().enumerate() {
        if !(0.0..=1.0).contains(&kp.visibility) || !kp.pos.is_finite() {
            return Err(violation("pose", format!("keypoint {i} invalid")));
        }
    }
    for (gi, g) in record.garments.iter().enumerate() {
        if g.keypoints.len() != schema.count(g.category) {
            return Err(violation(&format!("garments[{gi}].keypoints"), "count".into()));
        }
        if g.keypoints.iter().any(|p| p.x < 0.0 || p.y < 0.0 || p.x > w - 1.0 || p.y > h - 1.0) {
            return Err(violation(&format!("garments[{gi}].keypoints"), "outside image".into()));
        }
    }
    Ok(())
}

/// A corpus line that was skipped.
#[derive(Debug)]
pub struct Diagnostic {
    pub line: usize,
    pub error: DataError,
}

#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub records: Vec<PersonRecord>,
    pub diagnostics: Vec<Diagnostic>,
    /// Number of keypoints clamped into image bounds.
    pub clamped_keypoints: usize,
}

/// Resolve a record's image path against the corpus file's directory.
pub fn resolve_image_path(corpus_path: &Path, image_path: &str) -> PathBuf {
    let p = Path::new(image_path);
    if p.is_absolute() {
        p.to_owned()
    } else {
        corpus_path.parent().unwrap_or_else(|| Path::new(".")).join(p)
    }
}

/// Load a JSON-lines person corpus. Invalid lines are skipped and reported;
/// only an unreadable file is a hard error. Garment keypoints outside the
/// image are clamped with a warning.
pub fn load_person_records(path: &Path, schema: &KeypointSchema) -> Result<CorpusLoad, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::FileUnreadable {
        path: path.to_owned(),
        source,
    })?;
    let mut out = CorpusLoad::default();
    let mut seen = HashSet::new();
    for (idx, line_text) in text.lines().enumerate() {
        let line = idx + 1;
        if line_text.trim().is_empty() {
            continue;
        }
        let mut record = match PersonRecord::from_json_line(line_text, line, schema) {
            Ok(r) => r,
            Err(error) => {
                out.diagnostics.push(Diagnostic { line, error });
                continue;
            }
        };
        let violation = |field: &str, reason: String| DataError::SchemaViolation {
            line,
            field: field.to_owned(),
            reason,
        };
        if seen.contains(&record.image_id) {
            out.diagnostics.push(Diagnostic {
                line,
                error: violation("image_id", format!("duplicate {}", record.image_id)),
            });
            continue;
        }
        let image_file = resolve_image_path(path, &record.image_path);
        let dims = match image::image_dimensions(&image_file) {
            Ok(d) => d,
            Err(e) => {
                out.diagnostics.push(Diagnostic {
                    line,
                    error: violation("image_path", e.to_string()),
                });
                continue;
            }
        };
        let (max_x, max_y) = (dims.0 as f64 - 1.0, dims.1 as f64 - 1.0);
        for g in record.garments.iter_mut() {
            for p in g.keypoints.iter_mut() {
                let clamped = Point2::new(p.x.clamp(0.0, max_x), p.y.clamp(0.0, max_y));
                if clamped != *p {
                    log::warn!("line {line}: {} keypoint ({}, {}) clamped into image", record.image_id, p.x, p.y);
                    *p = clamped;
                    out.clamped_keypoints += 1;
                }
            }
        }
        if let Err(DataError::SchemaViolation { field, reason, .. }) = validate_record(&record, schema, dims) {
            out.diagnostics.push(Diagnostic {
                line,
                error: DataError::SchemaViolation { line, field, reason },
            });
            continue;
        }
        seen.insert(record.image_id.clone());
        out.records.push(record);
    }
    Ok(out)
}

pub fn corpus_to_jsonl(records: &[PersonRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_json_line());
        s.push('\n');
    }
    s
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
}

fn read_f32_payload(bytes: &[u8], count: usize) -> Result<Vec<f32>, DataError> {
    if bytes.len() != count * 4 {
        return Err(DataError::DimMismatch(format!(
            "payload holds {} bytes, header implies {}",
            bytes.len(),
            count * 4
        )));
    }
    let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DataError::NonFiniteValue(i));
    }
    Ok(values)
}

/// H×W×d grid of feature vectors, row-major and channel-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    dim: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, dim: usize, values: Vec<f32>) -> Result<Self, DataError> {
        if height == 0 || width == 0 || dim == 0 || values.len() != height * width * dim {
            return Err(DataError::DimMismatch(format!(
                "{height}x{width}x{dim} with {} values",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteValue(i));
        }
        Ok(Self {
            height,
            width,
            dim,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Feature vector of one grid cell.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn scaled(&self, factor: f32) -> FeatureMap {
        FeatureMap {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        if bytes.get(..4) != Some(b"FMAP".as_slice()) {
            return Err(DataError::BadMagic { expected: "FMAP" });
        }
        let (Some(h), Some(w), Some(d)) = (read_u32(bytes, 4), read_u32(bytes, 8), read_u32(bytes, 12)) else {
            return Err(DataError::DimMismatch("truncated header".into()));
        };
        let (h, w, d) = (h as usize, w as usize, d as usize);
        let values = read_f32_payload(&bytes[16..], h * w * d)?;
        Self::new(h, w, d, values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.values.len() * 4);
        out.extend_from_slice(b"FMAP");
        for v in [self.height, self.width, self.dim] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

pub fn load_feature_map(path: &Path) -> Result<FeatureMap, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::FileUnreadable {
        path: path.to_owned(),
        source,
    })?;
    FeatureMap::from_bytes(&bytes)
}

/// Largest |d(i,j) - d(j,i)| that is averaged away rather than rejected.
pub const MAX_ASYMMETRY: f64 = 1e-6;

/// Symmetric, zero-diagonal, nonnegative pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Build from a row-major `n*n` array, symmetrizing small asymmetries
    /// and zeroing the diagonal.
    pub fn from_rows(n: usize, mut values: Vec<f64>) -> Result<Self, DataError> {
        if values.len() != n * n {
            return Err(DataError::DimMismatch(format!("{n}x{n} matrix with {} values", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteValue(i));
        }
        for i in 0..n {
            values[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let a = values[i * n + j];
                let b = values[j * n + i];
                if a < 0.0 || b < 0.0 {
                    let (i, j) = if a < 0.0 { (i, j) } else { (j, i) };
                    return Err(DataError::NegativeDistance { i, j });
                }
                let diff = (a - b).abs();
                if diff > MAX_ASYMMETRY {
                    return Err(DataError::AsymmetryTooLarge { i, j, diff });
                }
                if a != b {
                    let m = 0.5 * (a + b);
                    values[i * n + j] = m;
                    values[j * n + i] = m;
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Restriction to `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> DistanceMatrix {
        let m = indices.len();
        let mut values = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                values.push(self.get(i, j));
            }
        }
        DistanceMatrix { n: m, values }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        if bytes.get(..4) != Some(b"DMAT".as_slice()) {
            return Err(DataError::BadMagic { expected: "DMAT" });
        }
        let n = read_u32(bytes, 4).ok_or_else(|| DataError::DimMismatch("truncated header".into()))? as usize;
        let payload = read_f32_payload(&bytes[8..], n * n)?;
        Self::from_rows(n, payload.into_iter().map(f64::from).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.values.len() * 4);
        out.extend_from_slice(b"DMAT");
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }
}

pub fn load_distance_matrix(path: &Path) -> Result<DistanceMatrix, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::FileUnreadable {
        path: path.to_owned(),
        source,
    })?;
    DistanceMatrix::from_bytes(&bytes)
}
