//! File-driven pipeline stages. Each stage reads the previous stage's files
//! under the output directory and writes its own atomically:
//!
//! ```text
//! output/qualify/{report.jsonl, qualified.jsonl}
//! output/curate/plan.jsonl
//! output/clone/{uv/, parts/, ledger.jsonl, manifest.jsonl}
//! output/crop/{images/, crop_log.jsonl, sweep/}
//! output/manifest.jsonl
//! output/preview/
//! output/probe/
//! ```
//!
//! Per-item failures are warnings counted in [`StageSummary`]; unreadable
//! inputs are hard errors.

pub mod config;
mod stages;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::{load_person_records, KeypointSchema, PersonRecord};
use crate::imaging::write_atomic;

pub use config::PipelineConfig;
pub use stages::*;

/// Soft-failure count of a stage run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageSummary {
    pub items: usize,
    pub warnings: usize,
}

pub fn stage_dir(config: &PipelineConfig, stage: &str) -> PathBuf {
    config.output.join(stage)
}

pub fn load_schema(config: &PipelineConfig) -> Result<KeypointSchema> {
    match &config.keypoint_schema {
        Some(p) => KeypointSchema::load(p).with_context(|| format!("keypoint schema {}", p.display())),
        None => Ok(KeypointSchema::default()),
    }
}

/// Valid corpus records plus the number of skipped lines.
pub fn load_corpus(config: &PipelineConfig, schema: &KeypointSchema) -> Result<(Vec<PersonRecord>, usize)> {
    let load = load_person_records(&config.corpus, schema).with_context(|| format!("corpus {}", config.corpus.display()))?;
    for d in &load.diagnostics {
        log::warn!("corpus line {}: {}", d.line, d.error);
    }
    Ok((load.records, load.diagnostics.len()))
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, to_jsonl(rows).as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}
