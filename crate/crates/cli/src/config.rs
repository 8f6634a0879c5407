//! Run configuration: a TOML document with the same keys as the command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario_id: Option<String>,
    pub dataset: Option<PathBuf>,
    /// Overrides the dataset's first scene.
    pub scene: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub edits: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
    pub gate_config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub iou_threshold: Option<f64>,
    pub min_observations: Option<usize>,
    pub occlusion_aware: Option<bool>,
    /// Accepted for symmetry with the flags; only fixture generation is seeded.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Reads a config file; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.dataset,
            &mut cfg.scene,
            &mut cfg.manifest,
            &mut cfg.edits,
            &mut cfg.sweep,
            &mut cfg.gate_config,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    /// Values set in `over` win.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        RunConfig {
            scenario_id: over.scenario_id.or(self.scenario_id),
            dataset: over.dataset.or(self.dataset),
            scene: over.scene.or(self.scene),
            manifest: over.manifest.or(self.manifest),
            edits: over.edits.or(self.edits),
            sweep: over.sweep.or(self.sweep),
            gate_config: over.gate_config.or(self.gate_config),
            out: over.out.or(self.out),
            iou_threshold: over.iou_threshold.or(self.iou_threshold),
            min_observations: over.min_observations.or(self.min_observations),
            occlusion_aware: over.occlusion_aware.or(self.occlusion_aware),
            seed: over.seed.or(self.seed),
            threads: over.threads.or(self.threads),
        }
    }
}
