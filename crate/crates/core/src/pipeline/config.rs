//! Plain-text `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

use crate::crop::CropPolicy;
use crate::curate::CurateParams;
use crate::pose::PoseConfig;
use crate::probe::ProbeConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub corpus: PathBuf,
    pub features_dir: Option<PathBuf>,
    pub distances: PathBuf,
    pub templates: PathBuf,
    pub keypoint_schema: Option<PathBuf>,
    pub output: PathBuf,
    /// Images for the crop stage; defaults to the manifest's source photos.
    pub crop_images: Option<PathBuf>,
    pub curate: CurateParams,
    pub crop: CropPolicy,
    pub pose: PoseConfig,
    pub suspect_rmse: f64,
    pub probe: ProbeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus: PathBuf::from("corpus.jsonl"),
            features_dir: None,
            distances: PathBuf::from("distances.dmat"),
            templates: PathBuf::from("templates"),
            keypoint_schema: None,
            output: PathBuf::from("output"),
            crop_images: None,
            curate: CurateParams::default(),
            crop: CropPolicy::default(),
            pose: PoseConfig::default(),
            suspect_rmse: crate::cloner::DEFAULT_SUSPECT_RMSE,
            probe: ProbeConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("config key {key}: cannot parse {value:?}: {e}"))
}

fn unit(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if !(0.0..=1.0).contains(&v) {
        bail!("config key {key}: {v} outside [0, 1]");
    }
    Ok(v)
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if !(v > 0.0 && v.is_finite()) {
        bail!("config key {key}: {v} must be positive");
    }
    Ok(v)
}

impl PipelineConfig {
    pub fn from_str_in(text: &str, base: &Path) -> Result<Self> {
        let mut c = Self::default();
        let path = |v: &str| {
            let p = Path::new(v);
            if p.is_absolute() {
                p.to_owned()
            } else {
                base.join(p)
            }
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected key = value", n + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => c.seed = parse(key, value)?,
                "corpus" => c.corpus = path(value),
                "features_dir" => c.features_dir = Some(path(value)),
                "distances" => c.distances = path(value),
                "templates" => c.templates = path(value),
                "keypoint_schema" => c.keypoint_schema = Some(path(value)),
                "output" => c.output = path(value),
                "crop_images" => c.crop_images = Some(path(value)),
                "eps1" => c.curate.eps_dedup = positive(key, value)?,
                "eps2" => c.curate.eps_group = positive(key, value)?,
                "min_pts" => c.curate.min_pts = parse(key, value)?,
                "per_cluster" => c.curate.per_cluster = parse(key, value)?,
                "train_k" => c.curate.train_k = parse(key, value)?,
                "test_k" => c.curate.test_k = parse(key, value)?,
                "keep_noise_singletons" => c.curate.keep_noise_singletons = parse(key, value)?,
                "rho" => c.crop.probability = unit(key, value)?,
                "tau" => c.crop.side_rate = unit(key, value)?,
                "crop_top_max" => c.crop.top_max = unit(key, value)?,
                "crop_bottom_max" => c.crop.bottom_max = unit(key, value)?,
                "min_detection_score" => c.pose.min_detection_score = unit(key, value)?,
                "min_area_fraction" => c.pose.min_area_fraction = unit(key, value)?,
                "min_aspect_ratio" => c.pose.min_aspect_ratio = positive(key, value)?,
                "min_limb_visibility" => c.pose.min_limb_visibility = Some(unit(key, value)?),
                "suspect_rmse" => c.suspect_rmse = positive(key, value)?,
                "probe_square" => c.probe.square = parse(key, value)?,
                "probe_stride" => c.probe.stride = parse(key, value)?,
                "probe_threshold" => c.probe.threshold = parse(key, value)?,
                _ => bail!("config line {}: unknown key {key:?}", n + 1),
            }
        }
        if c.curate.min_pts == 0 {
            bail!("config key min_pts must be at least 1");
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_str_in(&text, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides_and_paths() {
        let text = "# fixture\nseed = 42\ncorpus = data/corpus.jsonl\neps1 = 0.35\nrho=0\nkeep_noise_singletons = true\n";
        let c = PipelineConfig::from_str_in(text, Path::new("/base")).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.corpus, PathBuf::from("/base/data/corpus.jsonl"));
        assert_eq!(c.curate.eps_dedup, 0.35);
        assert_eq!(c.crop.probability, 0.0);
        assert!(c.curate.keep_noise_singletons);
        assert_eq!(c.curate.eps_group, 0.5);
    }

    #[test]
    fn rejects_bad_lines() {
        let base = Path::new(".");
        assert!(PipelineConfig::from_str_in("seed 4", base).is_err());
        assert!(PipelineConfig::from_str_in("colour = red", base).is_err());
        assert!(PipelineConfig::from_str_in("rho = 1.5", base).is_err());
        assert!(PipelineConfig::from_str_in("min_pts = 0", base).is_err());
    }
}
