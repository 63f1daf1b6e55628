use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_corpus, load_schema, read_jsonl, stage_dir, write_jsonl, PipelineConfig, StageSummary};
use crate::cloner::{check_collocation, clone_garment, compose_outfit, mask_garment, CloneMethod, CloneOptions, GarmentInput, PartReport};
use crate::crop::{crop_statistics, disturb_crop, plan_crop, sample_draws, CropLog, CropPolicy, CropStats, SWEEP_GRID};
use crate::curate::{curate, random_plan, CurateError, CurationPlan, Split};
use crate::data::{corpus_to_jsonl, load_distance_matrix, load_feature_map, resolve_image_path, PersonRecord};
use crate::imaging::{read_png, write_atomic, write_png};
use crate::pose::{qualify_record, ViewLabel, ViewMetrics};
use crate::probe::{probe_frontal_area, CropOracle, ProbeReport};
use crate::raster::Rect;
use crate::seed::{global_rng, item_rng};
use crate::template::{load_templates, select_template, TemplateRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualifyRow {
    pub image_id: String,
    pub label: ViewLabel,
    pub metrics: ViewMetrics,
    pub degenerate: bool,
}

/// Gate and classify every valid record; write the report and the corpus
/// of qualified records.
pub fn cmd_qualify(config: &PipelineConfig) -> Result<(Vec<QualifyRow>, StageSummary)> {
    let schema = load_schema(config)?;
    let (records, mut warnings) = load_corpus(config, &schema)?;
    if records.is_empty() {
        log::warn!("corpus {} has no valid records", config.corpus.display());
        warnings += 1;
    }
    let rows: Vec<QualifyRow> = records
        .par_iter()
        .map(|r| {
            let path = resolve_image_path(&config.corpus, &r.image_path);
            let dims = image::image_dimensions(&path).with_context(|| format!("reading {}", path.display()))?;
            let v = qualify_record(r, dims, &config.pose);
            Ok(QualifyRow {
                image_id: r.image_id.clone(),
                label: v.label,
                metrics: v.metrics,
                degenerate: v.degenerate,
            })
        })
        .collect::<Result<_>>()?;
    let qualified: Vec<PersonRecord> = records
        .iter()
        .zip(&rows)
        .filter(|(_, row)| row.label == ViewLabel::Qualified)
        .map(|(r, _)| r.clone())
        .collect();
    let dir = stage_dir(config, "qualify");
    write_jsonl(&dir.join("report.jsonl"), &rows)?;
    write_atomic(&dir.join("qualified.jsonl"), corpus_to_jsonl(&qualified).as_bytes())?;
    log::info!("qualify: {} of {} records qualified", qualified.len(), rows.len());
    Ok((
        rows,
        StageSummary {
            items: qualified.len(),
            warnings,
        },
    ))
}

/// Deduplicate and group the qualified records, or draw the random
/// baseline when `random` is set.
pub fn cmd_curate(config: &PipelineConfig, random: Option<usize>) -> Result<(CurationPlan, StageSummary)> {
    let schema = load_schema(config)?;
    let (records, mut warnings) = load_corpus(config, &schema)?;
    let report_path = stage_dir(config, "qualify").join("report.jsonl");
    let report: Vec<QualifyRow> = read_jsonl(&report_path).context("qualification report missing; run qualify first")?;
    let qualified: HashSet<&str> = report
        .iter()
        .filter(|r| r.label == ViewLabel::Qualified)
        .map(|r| r.image_id.as_str())
        .collect();
    let d = load_distance_matrix(&config.distances).with_context(|| format!("distance matrix {}", config.distances.display()))?;
    if d.len() != records.len() {
        return Err(CurateError::IndexMismatch {
            ids: records.len(),
            matrix: d.len(),
        }
        .into());
    }
    let indices: Vec<usize> = (0..records.len())
        .filter(|&i| qualified.contains(records[i].image_id.as_str()))
        .collect();
    let ids: Vec<String> = indices.iter().map(|&i| records[i].image_id.clone()).collect();
    let sub = d.submatrix(&indices);
    let plan = match random {
        Some(n) => random_plan(&ids, n, &mut global_rng(config.seed, "random-plan"))?,
        None => curate(&ids, &sub, &config.curate)?,
    };
    if plan.clusters.is_empty() {
        log::warn!("curation plan is empty");
        warnings += 1;
    }
    let totals = plan.totals();
    log::info!(
        "curate: {} clusters, {} selected ({} train, {} test)",
        plan.clusters.len(),
        totals.selected,
        totals.train,
        totals.test
    );
    write_atomic(&stage_dir(config, "curate").join("plan.jsonl"), plan.to_jsonl().as_bytes())?;
    Ok((
        plan,
        StageSummary {
            items: totals.selected,
            warnings,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub image_id: String,
    pub garment_index: usize,
    pub category: String,
    pub template_id: String,
    pub method: CloneMethod,
    pub cell_rect: Rect,
    pub parts: Vec<PartReport>,
    /// Paths relative to the output directory.
    pub uv_path: String,
    pub source_path: String,
    pub registered_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestGarment {
    pub category: String,
    pub template_id: String,
    pub uv_path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

/// One character per selected source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub image_id: String,
    pub cluster_id: usize,
    pub split: Split,
    pub status: RowStatus,
    pub garments: Vec<ManifestGarment>,
    pub errors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropLog>,
}

struct CloneJob<'a> {
    config: &'a PipelineConfig,
    registry: &'a TemplateRegistry,
    options: CloneOptions,
}

impl CloneJob<'_> {
    fn run(&self, record: Option<&PersonRecord>, image_id: &str, cluster_id: usize, split: Split) -> Result<(ManifestRow, Vec<LedgerRow>)> {
        let mut row = ManifestRow {
            image_id: image_id.to_owned(),
            cluster_id,
            split,
            status: RowStatus::Ok,
            garments: Vec::new(),
            errors: Vec::new(),
            crop: None,
        };
        let mut ledger = Vec::new();
        let fail = |mut row: ManifestRow, msg: String| {
            log::warn!("clone {image_id}: {msg}");
            row.errors.push(msg);
            row.status = RowStatus::Failed;
            Ok((row, Vec::new()))
        };
        let Some(record) = record else {
            return fail(row, "image not in corpus".into());
        };
        let categories: Vec<_> = record.garments.iter().map(|g| g.category).collect();
        if let Err(e) = check_collocation(&categories) {
            return fail(row, e.to_string());
        }
        let path = resolve_image_path(&self.config.corpus, &record.image_path);
        let image = match read_png(&path) {
            Ok(img) => img,
            Err(e) => return fail(row, format!("{}: {e}", path.display())),
        };
        let out = &self.config.output;
        let mut results = Vec::new();
        for (gi, g) in record.garments.iter().enumerate() {
            let mut rng = item_rng(self.config.seed, "template", &format!("{image_id}/{gi}"));
            let template = match select_template(g.category, self.registry, &mut rng) {
                Ok(t) => t,
                Err(e) => {
                    row.errors.push(format!("garment {gi}: {e}"));
                    continue;
                }
            };
            let features = match &self.config.features_dir {
                Some(dir) => {
                    let p = dir.join(format!("{image_id}_{gi}.fmap"));
                    if p.exists() {
                        match load_feature_map(&p) {
                            Ok(f) => Some(f),
                            Err(e) => {
                                row.errors.push(format!("garment {gi}: {}: {e}", p.display()));
                                continue;
                            }
                        }
                    } else {
                        None
                    }
                }
                None => None,
            };
            let input = GarmentInput {
                image_id,
                image: &image,
                garment: g,
                features: features.as_ref(),
            };
            let result = match clone_garment(&input, template, &self.options) {
                Ok(r) => r,
                Err(e) => {
                    row.errors.push(format!("garment {gi}: {e}"));
                    continue;
                }
            };
            let masked = mask_garment(&image, g)?;
            let uv_path = format!("clone/uv/{image_id}_{}_{}.png", g.category.name(), template.template_id);
            let source_path = format!("clone/parts/{image_id}_{gi}_source.png");
            let registered_path = format!("clone/parts/{image_id}_{gi}_registered.png");
            write_png(&out.join(&uv_path), &result.uv_map)?;
            write_png(&out.join(&source_path), &masked.pixels)?;
            write_png(&out.join(&registered_path), &result.registered)?;
            for p in result.parts.iter().filter(|p| p.suspect) {
                log::warn!(
                    "clone {image_id}: part {} rmse {:.2} is suspect",
                    p.name,
                    p.rmse.unwrap_or(f64::NAN)
                );
            }
            row.garments.push(ManifestGarment {
                category: g.category.name().into(),
                template_id: template.template_id.clone(),
                uv_path: uv_path.clone(),
            });
            ledger.push(LedgerRow {
                image_id: image_id.to_owned(),
                garment_index: gi,
                category: g.category.name().into(),
                template_id: template.template_id.clone(),
                method: result.method,
                cell_rect: result.cell_rect,
                parts: result.parts.clone(),
                uv_path,
                source_path,
                registered_path,
            });
            results.push(result);
        }
        if !results.is_empty() {
            compose_outfit(results)?;
        }
        if !row.errors.is_empty() {
            for e in &row.errors {
                log::warn!("clone {image_id}: {e}");
            }
            row.status = RowStatus::Failed;
        }
        Ok((row, ledger))
    }
}

/// Clone every selected image of the plan onto templates.
pub fn cmd_clone(config: &PipelineConfig) -> Result<(Vec<ManifestRow>, StageSummary)> {
    let schema = load_schema(config)?;
    let (records, warnings) = load_corpus(config, &schema)?;
    let by_id: HashMap<&str, &PersonRecord> = records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let plan_path = stage_dir(config, "curate").join("plan.jsonl");
    let plan_text = fs::read_to_string(&plan_path).context("curation plan missing; run curate first")?;
    let plan = CurationPlan::from_jsonl(&plan_text).with_context(|| format!("parsing {}", plan_path.display()))?;
    let registry = load_templates(&config.templates, &schema).with_context(|| format!("templates {}", config.templates.display()))?;
    let job = CloneJob {
        config,
        registry: &registry,
        options: CloneOptions {
            suspect_rmse: config.suspect_rmse,
            ..CloneOptions::default()
        },
    };
    let outcomes: Vec<(ManifestRow, Vec<LedgerRow>)> = plan
        .assignments()
        .par_iter()
        .map(|(id, cluster, split)| job.run(by_id.get(id.as_str()).copied(), id, *cluster, *split))
        .collect::<Result<_>>()?;
    let failed = outcomes.iter().filter(|(r, _)| r.status == RowStatus::Failed).count();
    let (rows, ledgers): (Vec<ManifestRow>, Vec<Vec<LedgerRow>>) = outcomes.into_iter().unzip();
    let ledger: Vec<LedgerRow> = ledgers.into_iter().flatten().collect();
    let dir = stage_dir(config, "clone");
    write_jsonl(&dir.join("ledger.jsonl"), &ledger)?;
    write_jsonl(&dir.join("manifest.jsonl"), &rows)?;
    log::info!("clone: {} characters, {} failed, {} uv maps", rows.len(), failed, ledger.len());
    Ok((
        rows,
        StageSummary {
            items: ledger.len(),
            warnings: warnings + failed,
        },
    ))
}

fn crop_inputs(config: &PipelineConfig) -> Result<Vec<(String, PathBuf)>> {
    if let Some(dir) = &config.crop_images {
        let mut out: Vec<(String, PathBuf)> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .filter_map(|p| Some((p.file_stem()?.to_str()?.to_owned(), p.clone())))
            .collect();
        out.sort();
        return Ok(out);
    }
    let schema = load_schema(config)?;
    let (records, _) = load_corpus(config, &schema)?;
    let by_id: HashMap<&str, &PersonRecord> = records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let manifest: Vec<ManifestRow> = read_jsonl(&stage_dir(config, "clone").join("manifest.jsonl"))
        .context("clone manifest missing; run clone first or set crop_images")?;
    Ok(manifest
        .iter()
        .filter(|r| r.status == RowStatus::Ok)
        .filter_map(|r| by_id.get(r.image_id.as_str()))
        .map(|r| (r.image_id.clone(), resolve_image_path(&config.corpus, &r.image_path)))
        .collect())
}

fn sweep_dir_name(rho: f64, tau: f64) -> String {
    format!("rho{rho:.1}_tau{tau:.1}")
}

/// Disturbance-crop the character source images (or `crop_images`). With
/// `sweep`, also write crop logs for every (ρ, τ) row of the ablation grid.
pub fn cmd_crop(config: &PipelineConfig, sweep: bool) -> Result<StageSummary> {
    let inputs = crop_inputs(config)?;
    let dir = stage_dir(config, "crop");
    let results: Vec<Option<(CropLog, (u32, u32))>> = inputs
        .par_iter()
        .map(|(id, path)| {
            let image = read_png(path).with_context(|| format!("reading {}", path.display()))?;
            let mut rng = item_rng(config.seed, "crop", id);
            match disturb_crop(&image, id, &config.crop, &mut rng) {
                Ok((out, log)) => {
                    write_png(&dir.join("images").join(format!("{id}.png")), &out)?;
                    Ok(Some((log, image.dimensions())))
                }
                Err(e) => {
                    log::warn!("crop {id}: {e}");
                    Ok(None)
                }
            }
        })
        .collect::<Result<_>>()?;
    let warnings = results.iter().filter(|r| r.is_none()).count();
    let done: Vec<(CropLog, (u32, u32))> = results.into_iter().flatten().collect();
    let logs: Vec<CropLog> = done.iter().map(|(l, _)| l.clone()).collect();
    write_jsonl(&dir.join("crop_log.jsonl"), &logs)?;
    log::info!("crop: {} images, {} cropped", logs.len(), logs.iter().filter(|l| l.cropped).count());

    if sweep {
        for (rho, tau) in SWEEP_GRID {
            let policy = CropPolicy {
                probability: rho,
                side_rate: tau,
                ..config.crop
            };
            let stage = format!("crop-sweep/{}", sweep_dir_name(rho, tau));
            let sweep_logs: Vec<CropLog> = done
                .iter()
                .map(|(l, dims)| {
                    let draws = sample_draws(&policy, &mut item_rng(config.seed, &stage, &l.image_id));
                    plan_crop(&l.image_id, &draws, *dims).map(|(_, log)| log)
                })
                .collect::<Result<_, _>>()?;
            write_jsonl(
                &dir.join("sweep").join(sweep_dir_name(rho, tau)).join("crop_log.jsonl"),
                &sweep_logs,
            )?;
        }
    }

    let manifest_path = stage_dir(config, "clone").join("manifest.jsonl");
    if manifest_path.exists() {
        let mut manifest: Vec<ManifestRow> = read_jsonl(&manifest_path)?;
        let by_id: HashMap<&str, &CropLog> = logs.iter().map(|l| (l.image_id.as_str(), l)).collect();
        for row in manifest.iter_mut() {
            row.crop = by_id.get(row.image_id.as_str()).map(|l| (*l).clone());
        }
        write_jsonl(&config.output.join("manifest.jsonl"), &manifest)?;
    }
    Ok(StageSummary {
        items: logs.len(),
        warnings,
    })
}

/// Statistical harness: `n` synthetic crops of a `dims` image.
pub fn cmd_crop_stats(config: &PipelineConfig, n: usize, dims: (u32, u32)) -> Result<CropStats> {
    let stats = crop_statistics(&config.crop, n, config.seed, "crop-stats", dims)?;
    let text = serde_json::to_string_pretty(&stats)? + "\n";
    write_atomic(&stage_dir(config, "crop").join("stats.json"), text.as_bytes())?;
    Ok(stats)
}

pub const PREVIEW_GUTTER: u32 = 8;
const SHEET_BACKGROUND: Rgb<u8> = Rgb([48, 48, 48]);

/// Panels side by side, each in a cell of the largest panel's size,
/// separated and framed by `gutter` pixels.
pub fn contact_sheet(panels: &[&RgbImage], gutter: u32) -> RgbImage {
    let cell_w = panels.iter().map(|p| p.width()).max().unwrap_or(0);
    let cell_h = panels.iter().map(|p| p.height()).max().unwrap_or(0);
    let n = panels.len() as u32;
    let mut sheet = RgbImage::from_pixel(n * cell_w + (n + 1) * gutter, cell_h + 2 * gutter, SHEET_BACKGROUND);
    for (i, p) in panels.iter().enumerate() {
        let x0 = gutter + i as u32 * (cell_w + gutter);
        image::imageops::replace(&mut sheet, *p, x0 as i64, gutter as i64);
    }
    sheet
}

/// One sheet per ledger row: masked source crop, registered UV, final UV.
pub fn cmd_preview(config: &PipelineConfig) -> Result<StageSummary> {
    let ledger: Vec<LedgerRow> =
        read_jsonl(&stage_dir(config, "clone").join("ledger.jsonl")).context("clone ledger missing; run clone first")?;
    let mut summary = StageSummary::default();
    if ledger.is_empty() {
        log::warn!("preview: clone ledger is empty");
        summary.warnings += 1;
        return Ok(summary);
    }
    let out = &config.output;
    let results: Vec<bool> = ledger
        .par_iter()
        .map(|row| {
            let mut panels = Vec::with_capacity(3);
            for rel in [&row.source_path, &row.registered_path, &row.uv_path] {
                match read_png(&out.join(rel)) {
                    Ok(img) => panels.push(img),
                    Err(e) => {
                        log::warn!("preview {}: {rel}: {e}", row.image_id);
                        return Ok(false);
                    }
                }
            }
            let refs: Vec<&RgbImage> = panels.iter().collect();
            let path = stage_dir(config, "preview").join(format!("{}_{}.png", row.image_id, row.garment_index));
            write_png(&path, &contact_sheet(&refs, PREVIEW_GUTTER))?;
            Ok(true)
        })
        .collect::<Result<_>>()?;
    summary.items = results.iter().filter(|ok| **ok).count();
    summary.warnings += results.len() - summary.items;
    Ok(summary)
}

/// Probe a template canvas with the synthetic crop oracle viewing `view`.
pub fn cmd_probe(config: &PipelineConfig, template_id: &str, view: Rect, step: u32) -> Result<ProbeReport> {
    let schema = load_schema(config)?;
    let registry = load_templates(&config.templates, &schema)?;
    let Some(template) = registry.get(template_id) else {
        bail!("no template {template_id:?} in {}", config.templates.display());
    };
    let oracle = CropOracle::with_step(view, step);
    let report = probe_frontal_area(&oracle, template.canvas, config.probe)?;
    let mask = &report.mask.0;
    let img = RgbImage::from_fn(mask.width(), mask.height(), |x, y| {
        if mask.get(x, y) {
            Rgb([255, 255, 255])
        } else {
            Rgb([0, 0, 0])
        }
    });
    let dir = stage_dir(config, "probe");
    write_png(&dir.join(format!("{template_id}_frontal.png")), &img)?;
    write_jsonl(&dir.join(format!("{template_id}_placements.jsonl")), &report.placements)?;
    Ok(report)
}

/// Relative path of every file under `root`, sorted, with its bytes.
pub fn snapshot_tree(root: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_owned();
                out.push((rel, fs::read(&path)?));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sheet_layout() {
        let a = RgbImage::new(10, 20);
        let b = RgbImage::new(30, 5);
        let c = RgbImage::new(7, 7);
        let sheet = contact_sheet(&[&a, &b, &c], 8);
        assert_eq!(sheet.dimensions(), (3 * 30 + 4 * 8, 20 + 2 * 8));
        assert_eq!(*sheet.get_pixel(8, 8), Rgb([0, 0, 0]));
        assert_eq!(*sheet.get_pixel(0, 0), SHEET_BACKGROUND);
    }
}
