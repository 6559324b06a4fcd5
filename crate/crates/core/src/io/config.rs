use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{ClipConfig, DatasetConfig, EgoFilter, PerturbationSpec, DEFAULT_ADE_THRESHOLD};
use crate::error::{Error, Result};
use crate::raster::{ImageFormat, RenderConfig};

/// Environment variable consulted when `workers` is unset.
pub const WORKERS_ENV: &str = "RASTER_WORKERS";

/// Everything a batch run needs. Loaded from JSON or TOML (by extension);
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub fraction_perturbed: f64,
    pub ade_threshold: f64,
    pub ego_filter: EgoFilter,
    pub cross_agent: bool,
    pub clips: ClipConfig,
    pub perturbation: PerturbationSpec,
    pub render: RenderConfig,
    pub image_format: ImageFormat,
    /// Also write the raw depth grid next to each image.
    pub write_depth: bool,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DatasetConfig::default();
        RunConfig {
            seed: d.seed,
            fraction_perturbed: d.fraction_perturbed,
            ade_threshold: DEFAULT_ADE_THRESHOLD,
            ego_filter: d.ego_filter,
            cross_agent: d.cross_agent,
            clips: d.clips,
            perturbation: d.perturbation,
            render: d.render,
            image_format: ImageFormat::Ppm,
            write_depth: false,
            out: PathBuf::from("out"),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => RunConfig::from_toml(&text),
            _ => RunConfig::from_json(&text),
        }?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.dataset().validate()
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            seed: self.seed,
            fraction_perturbed: self.fraction_perturbed,
            ade_threshold: self.ade_threshold,
            ego_filter: self.ego_filter,
            cross_agent: self.cross_agent,
            clips: self.clips,
            perturbation: self.perturbation,
            render: self.render.clone(),
        }
    }

    /// Worker count: explicit setting, then the environment, then the core count.
    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0))
            .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
            .unwrap_or(1)
    }

    /// The settings that determine output content: everything but `out` and
    /// `workers`, which only say where and how fast.
    pub fn content_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("out");
            map.remove("workers");
        }
        v
    }
}
