mod common;

use std::fs;

use clothclone::data::{
    corpus_to_jsonl, load_distance_matrix, load_feature_map, load_person_records, DataError, DistanceMatrix, FeatureMap, GarmentCategory,
};
use clothclone::seed::item_rng;
use clothclone::template::{load_templates, parse_template, select_template, TemplateError, TemplateRegistry, UvTemplate};

use common::{fixtures, schema};

fn fmap_bytes(h: u32, w: u32, d: u32, vals: &[f32]) -> Vec<u8> {
    let mut out = b"FMAP".to_vec();
    for v in [h, w, d] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn dmat_bytes(n: u32, vals: &[f32]) -> Vec<u8> {
    let mut out = b"DMAT".to_vec();
    out.extend_from_slice(&n.to_le_bytes());
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[test]
fn corpus20_skips_two_malformed_lines() {
    let load = load_person_records(&fixtures().join("corpus20/corpus.jsonl"), &schema()).unwrap();
    assert_eq!(load.records.len(), 18);
    let diag: Vec<(usize, String)> = load
        .diagnostics
        .iter()
        .map(|d| match &d.error {
            DataError::SchemaViolation { line, field, .. } => (*line, field.clone()),
            other => panic!("unexpected {other}"),
        })
        .collect();
    assert_eq!(diag, vec![(7, "pose".to_string()), (15, "person_bbox".to_string())]);
    // Order preserved, malformed ids absent.
    let ids: Vec<&str> = load.records.iter().map(|r| r.image_id.as_str()).collect();
    let expected: Vec<String> = (0..20).filter(|i| *i != 6 && *i != 14).map(|i| format!("c-{i:02}")).collect();
    assert_eq!(ids, expected);
}

#[test]
fn single_record_file() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(fixtures().join("e2e/corpus.jsonl")).unwrap();
    let path = dir.path().join("one.jsonl");
    let image = fixtures().join("e2e/images/e2e-0.png");
    let line = src.lines().next().unwrap().replace("images/e2e-0.png", image.to_str().unwrap());
    fs::write(&path, format!("{line}\n")).unwrap();
    let load = load_person_records(&path, &schema()).unwrap();
    assert_eq!((load.records.len(), load.diagnostics.len()), (1, 0));
    assert_eq!(load.records[0].image_id, "e2e-0");
}

#[test]
fn missing_corpus_is_unreadable() {
    let err = load_person_records(&fixtures().join("nope.jsonl"), &schema()).unwrap_err();
    assert!(matches!(err, DataError::FileUnreadable { .. }));
}

#[test]
fn valid_fixture_files_round_trip_byte_identical() {
    for corpus in ["e2e", "isolation", "qualify"] {
        let path = fixtures().join(corpus).join("corpus.jsonl");
        let load = load_person_records(&path, &schema()).unwrap();
        assert!(load.diagnostics.is_empty());
        assert_eq!(corpus_to_jsonl(&load.records), fs::read_to_string(&path).unwrap(), "{corpus}");
    }
    for dmat in ["e2e", "isolation", "qualify"] {
        let path = fixtures().join(dmat).join("distances.dmat");
        assert_eq!(load_distance_matrix(&path).unwrap().to_bytes(), fs::read(&path).unwrap());
    }
    let fmap = fixtures().join("e2e/features/e2e-0_0.fmap");
    assert_eq!(load_feature_map(&fmap).unwrap().to_bytes(), fs::read(&fmap).unwrap());
}

#[test]
fn feature_map_decode() {
    let f = FeatureMap::from_bytes(&fmap_bytes(2, 2, 1, &[1.0, 2.0, 3.0, 4.0])).unwrap();
    assert_eq!((f.height(), f.width(), f.dim()), (2, 2, 1));
    assert_eq!(f.values(), &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(f.at(1, 0), &[3.0]);
}

#[test]
fn feature_map_channels_are_fastest() {
    let f = FeatureMap::from_bytes(&fmap_bytes(1, 2, 3, &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0])).unwrap();
    assert_eq!(f.at(0, 1), &[10.0, 11.0, 12.0]);
}

#[test]
fn feature_map_errors() {
    let short = FeatureMap::from_bytes(&fmap_bytes(2, 2, 1, &[1.0, 2.0, 3.0]));
    assert!(matches!(short, Err(DataError::DimMismatch(_))));
    let mut bad = fmap_bytes(1, 1, 1, &[1.0]);
    bad[..4].copy_from_slice(b"FMAQ");
    assert!(matches!(FeatureMap::from_bytes(&bad), Err(DataError::BadMagic { .. })));
    let nan = FeatureMap::from_bytes(&fmap_bytes(1, 1, 2, &[0.0, f32::NAN]));
    assert!(matches!(nan, Err(DataError::NonFiniteValue(1))));
}

#[test]
fn zero_feature_map_of_full_size_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeros.fmap");
    let bytes = fmap_bytes(48, 16, 512, &vec![0.0; 48 * 16 * 512]);
    fs::write(&path, &bytes).unwrap();
    let f = load_feature_map(&path).unwrap();
    assert_eq!((f.height(), f.width(), f.dim()), (48, 16, 512));
    assert!(f.values().iter().all(|v| *v == 0.0));
    assert_eq!(f.to_bytes(), bytes);
}

#[test]
fn distance_matrix_examples() {
    let ok = DistanceMatrix::from_bytes(&dmat_bytes(2, &[0.0, 0.3, 0.3, 0.0])).unwrap();
    assert_eq!(ok.len(), 2);
    assert!((ok.get(0, 1) - 0.3).abs() < 1e-7);
    let asym = DistanceMatrix::from_bytes(&dmat_bytes(2, &[0.0, 0.3, 0.8, 0.0]));
    assert!(matches!(asym, Err(DataError::AsymmetryTooLarge { i: 0, j: 1, .. })));
    let neg = DistanceMatrix::from_bytes(&dmat_bytes(2, &[0.0, -0.1, -0.1, 0.0]));
    assert!(matches!(neg, Err(DataError::NegativeDistance { .. })));
    let mut magic = dmat_bytes(1, &[0.0]);
    magic[0] = b'X';
    assert!(matches!(DistanceMatrix::from_bytes(&magic), Err(DataError::BadMagic { .. })));
    assert!(matches!(
        DistanceMatrix::from_bytes(&dmat_bytes(2, &[0.0; 3])),
        Err(DataError::DimMismatch(_))
    ));
}

#[test]
fn hand_built_matrix_is_normalized() {
    let d = load_distance_matrix(&fixtures().join("distances4.dmat")).unwrap();
    assert_eq!(d.len(), 4);
    for i in 0..4 {
        assert_eq!(d.get(i, i), 0.0);
        for j in 0..4 {
            assert!((d.get(i, j) - d.get(j, i)).abs() <= 1e-9);
        }
    }
}

fn summary(r: &TemplateRegistry) -> Vec<(String, usize, Vec<bool>)> {
    r.iter()
        .map(|t: &UvTemplate| {
            let (w, h) = t.canvas;
            let mask = (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .map(|(x, y)| t.registered_region.get(x, y))
                .collect();
            (t.template_id.clone(), t.parts.len(), mask)
        })
        .collect()
}

#[test]
fn fixture_registry_counts_by_kind() {
    let reg = load_templates(&fixtures().join("e2e/templates"), &schema()).unwrap();
    assert_eq!(reg.len(), 4);
    assert_eq!(reg.count_by_kind(), (2, 2));
    assert_eq!(reg.for_category(GarmentCategory::from_id(2).unwrap()).len(), 1);
}

#[test]
fn registry_loading_is_idempotent_and_order_independent() {
    let dir = fixtures().join("e2e/templates");
    let a = load_templates(&dir, &schema()).unwrap();
    let b = load_templates(&dir, &schema()).unwrap();
    assert_eq!(summary(&a), summary(&b));
    let mut templates: Vec<UvTemplate> = a.iter().cloned().collect();
    templates.reverse();
    assert_eq!(summary(&TemplateRegistry::new(templates).unwrap()), summary(&a));
}

#[test]
fn single_template_directory() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("e2e/templates");
    fs::copy(src.join("tee-a.json"), dir.path().join("tee-a.json")).unwrap();
    fs::copy(src.join("tee-a.png"), dir.path().join("tee-a.png")).unwrap();
    assert_eq!(load_templates(dir.path(), &schema()).unwrap().len(), 1);
}

#[test]
fn three_keypoint_part_is_invalid() {
    let json = fs::read_to_string(fixtures().join("e2e/templates/tee-a.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let part = &mut v["parts"][0];
    part["image_keypoint_indices"].as_array_mut().unwrap().pop();
    part["uv_keypoints"].as_array_mut().unwrap().pop();
    let err = parse_template(&v.to_string(), &schema(), None).unwrap_err();
    assert!(matches!(err, TemplateError::DescriptorInvalid { .. }), "{err}");
}

#[test]
fn template_choice_is_uniform_and_seeded() {
    let base = fs::read_to_string(fixtures().join("e2e/templates/tee-a.json")).unwrap();
    let mut second: serde_json::Value = serde_json::from_str(&base).unwrap();
    second["template_id"] = "tee-b".into();
    let reg = TemplateRegistry::new([
        parse_template(&base, &schema(), None).unwrap(),
        parse_template(&second.to_string(), &schema(), None).unwrap(),
    ])
    .unwrap();
    let cat = GarmentCategory::from_id(2).unwrap();
    let mut rng = item_rng(5, "template", "freq");
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| select_template(cat, &reg, &mut rng).unwrap().template_id == "tee-a")
        .count();
    assert!((hits as f64 / n as f64 - 0.5).abs() <= 0.02, "{hits}");
    let pick = |s| {
        select_template(cat, &reg, &mut item_rng(s, "template", "x"))
            .unwrap()
            .template_id
            .clone()
    };
    assert_eq!(pick(11), pick(11));
    let missing = GarmentCategory::from_id(8).unwrap();
    assert!(matches!(
        select_template(missing, &reg, &mut rng),
        Err(TemplateError::NoTemplateForCategory(_))
    ));
}
