//! Regenerates the committed test fixtures under `tests/fixtures/`.
//!
//! ```text
//! cargo run -p clothclone --example make_fixtures [-- OUTDIR]
//! ```
//!
//! Every byte is a pure function of this file, so rerunning it on a clean
//! checkout must leave `git status` unchanged.

use std::fs;
use std::path::{Path, PathBuf};

use clothclone::cloner::mask_garment;
use clothclone::data::{coco, DistanceMatrix, GarmentAnnotation, GarmentCategory, Keypoint, PersonRecord, PoseKeypoints, POSE_KEYPOINTS};
use clothclone::features::fallback_features;
use clothclone::imaging::write_png;
use clothclone::{BBox, Mask, Point2, RgbImage};
use serde_json::{json, Value};

type Poly = Vec<(f64, f64)>;

fn pts(p: &[(f64, f64)]) -> Vec<Point2> {
    p.iter().map(|&(x, y)| Point2::new(x, y)).collect()
}

fn write(path: &Path, bytes: &[u8]) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, bytes).unwrap();
}

fn write_lines(path: &Path, lines: &[String]) {
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    write(path, text.as_bytes());
}

fn bbox_of(p: &[(f64, f64)]) -> BBox {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in p {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    BBox::new(x0, y0, x1 - x0 + 1.0, y1 - y0 + 1.0)
}

fn garment(category: GarmentCategory, p: &[(f64, f64)]) -> GarmentAnnotation {
    GarmentAnnotation {
        category,
        bbox: bbox_of(p),
        keypoints: pts(p),
    }
}

fn pose(points: &[(usize, f64, f64)]) -> PoseKeypoints {
    let mut out = [Keypoint {
        pos: Point2::new(0.0, 0.0),
        visibility: 1.0,
    }; POSE_KEYPOINTS];
    for &(i, x, y) in points {
        out[i].pos = Point2::new(x, y);
    }
    PoseKeypoints { points: out }
}

/// Frontal pose of a 96x192 figure: shoulders 36 apart, torso 68 tall.
fn person_pose(dx: f64) -> PoseKeypoints {
    pose(&[
        (0, 48.0 + dx, 20.0),
        (1, 52.0 + dx, 16.0),
        (2, 44.0 + dx, 16.0),
        (3, 56.0 + dx, 18.0),
        (4, 40.0 + dx, 18.0),
        (coco::LEFT_SHOULDER, 66.0 + dx, 44.0),
        (coco::RIGHT_SHOULDER, 30.0 + dx, 44.0),
        (coco::LEFT_ELBOW, 82.0 + dx, 80.0),
        (coco::RIGHT_ELBOW, 14.0 + dx, 80.0),
        (coco::LEFT_WRIST, 86.0 + dx, 108.0),
        (coco::RIGHT_WRIST, 10.0 + dx, 108.0),
        (coco::LEFT_HIP, 60.0 + dx, 112.0),
        (coco::RIGHT_HIP, 36.0 + dx, 112.0),
        (coco::LEFT_KNEE, 58.0 + dx, 160.0),
        (coco::RIGHT_KNEE, 38.0 + dx, 160.0),
        (15, 56.0 + dx, 184.0),
        (16, 40.0 + dx, 184.0),
    ])
}

const TEE: [(f64, f64); 10] = [
    (54.0, 40.0),
    (66.0, 44.0),
    (78.0, 64.0),
    (70.0, 70.0),
    (66.0, 110.0),
    (30.0, 110.0),
    (26.0, 70.0),
    (18.0, 64.0),
    (30.0, 44.0),
    (42.0, 40.0),
];
const TROUSERS: [(f64, f64); 7] = [
    (62.0, 112.0),
    (66.0, 180.0),
    (52.0, 180.0),
    (48.0, 130.0),
    (44.0, 180.0),
    (30.0, 180.0),
    (34.0, 112.0),
];
const SHORTS: [(f64, f64); 7] = [
    (62.0, 112.0),
    (66.0, 150.0),
    (50.0, 150.0),
    (48.0, 130.0),
    (46.0, 150.0),
    (30.0, 150.0),
    (34.0, 112.0),
];
const SKIRT: [(f64, f64); 4] = [(60.0, 112.0), (70.0, 170.0), (26.0, 170.0), (36.0, 112.0)];
const DRESS: [(f64, f64); 8] = [
    (54.0, 40.0),
    (66.0, 44.0),
    (62.0, 110.0),
    (72.0, 170.0),
    (24.0, 170.0),
    (34.0, 110.0),
    (30.0, 44.0),
    (42.0, 40.0),
];

fn shift(p: &[(f64, f64)], dx: f64) -> Poly {
    p.iter().map(|&(x, y)| (x + dx, y)).collect()
}

/// Paints `poly` with two-colour stripes of `period` pixels, horizontal or
/// vertical.
fn paint(img: &mut RgbImage, poly: &[(f64, f64)], a: [u8; 3], b: [u8; 3], period: u32, horizontal: bool) {
    let mask = Mask::from_polygon(img.width(), img.height(), &pts(poly));
    for (x, y) in mask.iter_set() {
        let t = if horizontal { y } else { x };
        let c = if (t / period).is_multiple_of(2) { a } else { b };
        img.put_pixel(x, y, image::Rgb(c));
    }
}

fn person_image(dx: f64, background: [u8; 3]) -> RgbImage {
    let mut img = RgbImage::from_fn(96, 192, |_, y| {
        let shade = (y / 12) as u8;
        image::Rgb([background[0] - shade, background[1] - shade, background[2] - shade])
    });
    let skin = [224, 182, 150];
    let head: Poly = (0..16)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 16.0;
            (48.0 + dx + 10.0 * a.cos(), 24.0 + 12.0 * a.sin())
        })
        .collect();
    paint(&mut img, &head, skin, skin, 1, true);
    for arm in [
        [(66.0, 44.0), (88.0, 108.0), (82.0, 112.0), (62.0, 56.0)],
        [(30.0, 44.0), (34.0, 56.0), (14.0, 112.0), (8.0, 108.0)],
    ] {
        paint(&mut img, &shift(&arm, dx), skin, skin, 1, true);
    }
    for leg in [
        [(40.0, 112.0), (46.0, 112.0), (46.0, 186.0), (40.0, 186.0)],
        [(50.0, 112.0), (56.0, 112.0), (56.0, 186.0), (50.0, 186.0)],
    ] {
        paint(&mut img, &shift(&leg, dx), skin, skin, 1, true);
    }
    img
}

fn record(id: &str, path: &str, score: f64, bbox: BBox, pose: PoseKeypoints, garments: Vec<GarmentAnnotation>) -> PersonRecord {
    PersonRecord {
        image_id: id.into(),
        image_path: path.into(),
        detection_score: score,
        person_bbox: bbox,
        pose,
        garments,
    }
}

fn dmat(n: usize, f: impl Fn(usize, usize) -> f64) -> Vec<u8> {
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            v.push(if i == j { 0.0 } else { f(i, j) });
        }
    }
    DistanceMatrix::from_rows(n, v).unwrap().to_bytes()
}

fn templates(dir: &Path) {
    let tee = json!({
        "template_id": "tee-a",
        "category": 2,
        "kind": "regular",
        "canvas": [128, 128],
        "parts": [{
            "name": "torso-front",
            "view": "front",
            "uv_keypoints": [[104.0, 16.0], [104.0, 112.0], [24.0, 112.0], [24.0, 16.0]],
            "image_keypoint_indices": [1, 4, 5, 8],
            "target_rect": [24, 16, 80, 96],
            "mask_polygon": [[24.0, 16.0], [104.0, 16.0], [104.0, 112.0], [24.0, 112.0]]
        }]
    });
    let trousers = json!({
        "template_id": "trousers-a",
        "category": 4,
        "kind": "regular",
        "canvas": [128, 128],
        "parts": [
            {
                "name": "right-leg",
                "uv_keypoints": [[8.0, 8.0], [60.0, 8.0], [60.0, 120.0], [8.0, 120.0]],
                "image_keypoint_indices": [6, 3, 4, 5],
                "target_rect": [8, 8, 52, 112],
                "mask_polygon": [[8.0, 8.0], [60.0, 8.0], [60.0, 120.0], [8.0, 120.0]]
            },
            {
                "name": "left-leg",
                "uv_keypoints": [[68.0, 8.0], [120.0, 8.0], [120.0, 120.0], [68.0, 120.0]],
                "image_keypoint_indices": [3, 0, 1, 2],
                "target_rect": [68, 8, 52, 112],
                "mask_polygon": [[68.0, 8.0], [120.0, 8.0], [120.0, 120.0], [68.0, 120.0]]
            }
        ]
    });
    let skirt = json!({"template_id": "skirt-a", "category": 6, "kind": "irregular", "canvas": [96, 96], "parts": []});
    let shorts = json!({"template_id": "shorts-a", "category": 5, "kind": "irregular", "canvas": [64, 64], "parts": []});
    for t in [&tee, &trousers, &skirt, &shorts] {
        let id = t["template_id"].as_str().unwrap();
        write(&dir.join(format!("{id}.json")), serde_json::to_string_pretty(t).unwrap().as_bytes());
    }
    let base = RgbImage::from_pixel(128, 128, image::Rgb([40, 40, 40]));
    write_png(&dir.join("tee-a.png"), &base).unwrap();
}

/// Top colour, stripe colour, stripe period, lower garment, lower colour.
type Look = ([u8; 3], [u8; 3], u32, GarmentCategory, [u8; 3]);

/// Five qualified images over two lookalike groups, four templates and
/// one feature map.
fn e2e(root: &Path) {
    let dir = root.join("e2e");
    templates(&dir.join("templates"));
    let looks: [Look; 5] = [
        ([200, 40, 40], [240, 220, 200], 6, GarmentCategory::Trousers, [30, 40, 90]),
        ([190, 50, 40], [230, 210, 190], 5, GarmentCategory::Skirt, [60, 60, 70]),
        ([210, 40, 50], [250, 220, 210], 7, GarmentCategory::Shorts, [120, 100, 60]),
        ([40, 120, 60], [20, 60, 30], 4, GarmentCategory::Trousers, [90, 80, 70]),
        ([50, 130, 70], [30, 70, 40], 8, GarmentCategory::Skirt, [150, 60, 90]),
    ];
    let mut lines = Vec::new();
    for (i, (a, b, period, lower, lower_color)) in looks.into_iter().enumerate() {
        let dx = [0.0, 2.0, -2.0, 1.0, -1.0][i];
        let id = format!("e2e-{i}");
        let mut img = person_image(dx, [230, 232, 236]);
        let top = shift(&TEE, dx);
        let bottom = shift(
            match lower {
                GarmentCategory::Trousers => &TROUSERS[..],
                GarmentCategory::Shorts => &SHORTS[..],
                _ => &SKIRT[..],
            },
            dx,
        );
        let darker = lower_color.map(|c| c / 2 + 10);
        paint(&mut img, &bottom, lower_color, darker, 3 + i as u32, false);
        paint(&mut img, &top, a, b, period, true);
        write_png(&dir.join(format!("images/{id}.png")), &img).unwrap();
        let garments = vec![garment(GarmentCategory::ShortSleeves, &top), garment(lower, &bottom)];
        let r = record(
            &id,
            &format!("images/{id}.png"),
            0.9 + 0.01 * i as f64,
            BBox::new(4.0, 4.0, 88.0, 184.0),
            person_pose(dx),
            garments,
        );
        if i == 0 {
            let masked = mask_garment(&img, &r.garments[0]).unwrap();
            write(&dir.join("features/e2e-0_0.fmap"), &fallback_features(&masked.pixels).to_bytes());
        }
        lines.push(r.to_json_line());
    }
    write_lines(&dir.join("corpus.jsonl"), &lines);
    let group = |i: usize| usize::from(i >= 3);
    write(
        &dir.join("distances.dmat"),
        &dmat(5, |i, j| if group(i) == group(j) { 0.45 } else { 0.9 }),
    );
    write(
        &dir.join("pipeline.conf"),
        b"# bundled five-image run\nseed = 7\ncorpus = corpus.jsonl\nfeatures_dir = features\ndistances = distances.dmat\ntemplates = templates\noutput = output\n",
    );
}

/// Clone failures that must stay isolated: a category without a template
/// and a dress worn with trousers.
fn isolation(root: &Path) {
    let dir = root.join("isolation");
    let img = {
        let mut img = person_image(0.0, [230, 232, 236]);
        paint(&mut img, &TROUSERS, [30, 40, 90], [25, 30, 60], 3, false);
        paint(&mut img, &TEE, [200, 40, 40], [240, 220, 200], 6, true);
        img
    };
    write_png(&dir.join("images/person.png"), &img).unwrap();
    let rec = |id: &str, garments| {
        record(
            id,
            "images/person.png",
            0.95,
            BBox::new(4.0, 4.0, 88.0, 184.0),
            person_pose(0.0),
            garments,
        )
    };
    let lines = [
        rec(
            "iso-ok",
            vec![
                garment(GarmentCategory::ShortSleeves, &TEE),
                garment(GarmentCategory::Trousers, &TROUSERS),
            ],
        ),
        rec("iso-dress", vec![garment(GarmentCategory::LongDress, &DRESS)]),
        rec(
            "iso-conflict",
            vec![
                garment(GarmentCategory::LongDress, &DRESS),
                garment(GarmentCategory::Trousers, &TROUSERS),
            ],
        ),
    ]
    .map(|r| r.to_json_line());
    write_lines(&dir.join("corpus.jsonl"), &lines);
    write(&dir.join("distances.dmat"), &dmat(3, |_, _| 0.45));
    write(
        &dir.join("pipeline.conf"),
        b"seed = 3\ncorpus = corpus.jsonl\ndistances = distances.dmat\ntemplates = ../e2e/templates\noutput = output\n",
    );
}

/// 64x128 pose on a plain image: shoulders 20 apart, torso 40 tall.
fn small_pose(edit: impl Fn(&mut PoseKeypoints)) -> PoseKeypoints {
    let mut p = pose(&[
        (coco::LEFT_SHOULDER, 42.0, 30.0),
        (coco::RIGHT_SHOULDER, 22.0, 30.0),
        (coco::LEFT_ELBOW, 54.0, 50.0),
        (coco::RIGHT_ELBOW, 10.0, 50.0),
        (coco::LEFT_WRIST, 58.0, 68.0),
        (coco::RIGHT_WRIST, 6.0, 68.0),
        (coco::LEFT_HIP, 40.0, 70.0),
        (coco::RIGHT_HIP, 24.0, 70.0),
        (coco::LEFT_KNEE, 40.0, 100.0),
        (coco::RIGHT_KNEE, 24.0, 100.0),
    ]);
    edit(&mut p);
    p
}

fn set(p: &mut PoseKeypoints, i: usize, x: f64, y: f64) {
    p.points[i].pos = Point2::new(x, y);
}

/// 1 back view, 1 side view, 1 occluded and 2 qualified records.
fn qualify(root: &Path) {
    let dir = root.join("qualify");
    write_png(
        &dir.join("images/plain.png"),
        &RgbImage::from_pixel(64, 128, image::Rgb([128, 128, 128])),
    )
    .unwrap();
    let rec = |id: &str, pose| record(id, "images/plain.png", 0.9, BBox::new(4.0, 4.0, 56.0, 120.0), pose, vec![]);
    let lines = [
        rec(
            "q-back",
            small_pose(|p| {
                set(p, coco::LEFT_SHOULDER, 22.0, 30.0);
                set(p, coco::RIGHT_SHOULDER, 42.0, 30.0);
            }),
        ),
        rec(
            "q-side",
            small_pose(|p| {
                set(p, coco::LEFT_SHOULDER, 34.0, 30.0);
                set(p, coco::RIGHT_SHOULDER, 30.0, 30.0);
            }),
        ),
        rec("q-occluded", small_pose(|p| set(p, coco::LEFT_WRIST, 32.0, 50.0))),
        rec("q-front-a", small_pose(|_| {})),
        rec("q-front-b", small_pose(|p| set(p, coco::RIGHT_ELBOW, 12.0, 48.0))),
    ]
    .map(|r| r.to_json_line());
    write_lines(&dir.join("corpus.jsonl"), &lines);
    write(&dir.join("distances.dmat"), &dmat(5, |_, _| 0.9));
    write(
        &dir.join("pipeline.conf"),
        b"corpus = corpus.jsonl\ndistances = distances.dmat\ntemplates = ../e2e/templates\n",
    );
}

/// Twenty lines, two of them malformed (lines 7 and 15).
fn corpus20(root: &Path) {
    let dir = root.join("corpus20");
    write_png(
        &dir.join("images/plain.png"),
        &RgbImage::from_pixel(64, 128, image::Rgb([90, 100, 110])),
    )
    .unwrap();
    let mut lines = Vec::new();
    for i in 0..20 {
        let r = record(
            &format!("c-{i:02}"),
            "images/plain.png",
            0.5 + 0.025 * i as f64,
            BBox::new(2.0, 2.0, 40.0 + i as f64, 100.0),
            small_pose(|_| {}),
            vec![garment(
                GarmentCategory::Skirt,
                &[(36.0, 70.0), (40.0, 100.0), (24.0, 100.0), (28.0, 70.0)],
            )],
        );
        let mut line = r.to_json_line();
        if i == 6 {
            let mut v: Value = serde_json::from_str(&line).unwrap();
            v["pose"].as_array_mut().unwrap().pop();
            line = v.to_string();
        }
        if i == 14 {
            let mut v: Value = serde_json::from_str(&line).unwrap();
            v.as_object_mut().unwrap().remove("person_bbox");
            line = v.to_string();
        }
        lines.push(line);
    }
    write_lines(&dir.join("corpus.jsonl"), &lines);
}

/// Adapter-style 4x4 matrix: nonzero diagonal, float-noise asymmetry.
fn distances4(root: &Path) {
    let d = [
        [0.25f32, 0.30, 0.70, 0.90],
        [0.3000004, 0.25, 0.60, 0.80],
        [0.70, 0.60, 0.25, 0.35],
        [0.90, 0.8000003, 0.35, 0.25],
    ];
    let mut bytes = b"DMAT".to_vec();
    bytes.extend_from_slice(&4u32.to_le_bytes());
    for v in d.iter().flatten() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write(&root.join("distances4.dmat"), &bytes);
}

/// Hand-labelled poses around each rule boundary.
fn poses12(root: &Path) {
    // Base: shoulders (120,100)/(80,100), hips (115,200)/(85,200), knees
    // (115,280)/(85,280). W = 40, H = 100, upper widening 4, lower 3.
    let base = |edit: &dyn Fn(&mut PoseKeypoints)| {
        let mut p = pose(&[
            (coco::LEFT_SHOULDER, 120.0, 100.0),
            (coco::RIGHT_SHOULDER, 80.0, 100.0),
            (coco::LEFT_HIP, 115.0, 200.0),
            (coco::RIGHT_HIP, 85.0, 200.0),
            (coco::LEFT_KNEE, 115.0, 280.0),
            (coco::RIGHT_KNEE, 85.0, 280.0),
            (coco::LEFT_ELBOW, 160.0, 150.0),
            (coco::RIGHT_ELBOW, 40.0, 150.0),
            (coco::LEFT_WRIST, 170.0, 200.0),
            (coco::RIGHT_WRIST, 30.0, 200.0),
        ]);
        edit(&mut p);
        p
    };
    let narrow = |half: f64| {
        move |p: &mut PoseKeypoints| {
            set(p, coco::LEFT_SHOULDER, 100.0 + half, 100.0);
            set(p, coco::RIGHT_SHOULDER, 100.0 - half, 100.0);
        }
    };
    let cases: Vec<(&str, &str, PoseKeypoints)> = vec![
        ("frontal", "qualified", base(&|_| {})),
        (
            "frontal-scaled",
            "qualified",
            base(&|_| {}).map_points(|q| Point2::new(3.0 * q.x + 11.0, 3.0 * q.y - 7.0)),
        ),
        ("back-one-pixel", "back_view", base(&|p| set(p, coco::RIGHT_SHOULDER, 121.0, 100.0))),
        (
            "back-mirrored",
            "back_view",
            base(&|_| {}).map_points(|q| Point2::new(200.0 - q.x, q.y)),
        ),
        ("ratio-0.29", "side_view", base(&narrow(14.5))),
        ("ratio-0.30", "qualified", base(&narrow(15.0))),
        ("side-narrow", "side_view", base(&narrow(2.5))),
        ("hand-on-chest", "occluded", base(&|p| set(p, coco::LEFT_WRIST, 100.0, 150.0))),
        ("elbow-on-thigh", "occluded", base(&|p| set(p, coco::RIGHT_ELBOW, 100.0, 240.0))),
        ("elbow-in-margin", "occluded", base(&|p| set(p, coco::LEFT_ELBOW, 120.5, 150.0))),
        ("elbow-past-margin", "qualified", base(&|p| set(p, coco::LEFT_ELBOW, 122.5, 150.0))),
        ("hand-on-margin-edge", "occluded", base(&|p| set(p, coco::LEFT_WRIST, 121.5, 150.0))),
    ];
    let lines: Vec<String> = cases
        .into_iter()
        .map(|(name, label, p)| {
            let pose: Vec<[f64; 3]> = p.points.iter().map(|k| [k.pos.x, k.pos.y, k.visibility]).collect();
            json!({"name": name, "label": label, "pose": pose}).to_string()
        })
        .collect();
    write_lines(&root.join("poses12.jsonl"), &lines);
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));
    e2e(&out);
    isolation(&out);
    qualify(&out);
    corpus20(&out);
    distances4(&out);
    poses12(&out);
    println!("fixtures written to {}", out.display());
}
