//! Full pipeline: validate, edit, sample poses, render, evaluate, gate, emit.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use splatgate_core::coverage::{CoverageOptions, DEFAULT_MIN_OBSERVATIONS};
use splatgate_core::metrics::Palette;
use splatgate_core::metrics::DEFAULT_IOU_THRESHOLD;
use splatgate_core::report::{apply_gate, emit_report, Baseline, DetectorBaseline, GateConfig, Verdict};
use splatgate_core::sampler::SweepSpec;
use splatgate_core::scene::{load_scene, load_trajectory, save_scene, scene_hash};

use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::pipeline::{self, stage, write_json, EvalSettings, RenderIndex};

/// Artifact layout under the output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn scene_dir(&self) -> PathBuf {
        self.root.join("scene")
    }
    pub fn poses(&self) -> PathBuf {
        self.root.join("poses.json")
    }
    pub fn renders(&self) -> PathBuf {
        self.root.join("renders")
    }
    pub fn diff(&self) -> PathBuf {
        self.root.join("diff")
    }
    pub fn coverage(&self) -> PathBuf {
        self.root.join("coverage.json")
    }
    pub fn baseline(&self) -> PathBuf {
        self.root.join("baseline")
    }
}

/// Checks that the gate's detector baseline matches what the baseline report was built from.
pub fn check_detector_baseline(cfg: &GateConfig, baseline_source: Option<&str>) -> Result<()> {
    if cfg.detector_baseline == DetectorBaseline::DetectorOnGroundTruth
        && baseline_source != Some(pipeline::detector_label(DetectorBaseline::DetectorOnGroundTruth))
    {
        bail!(
            "gate config asks for detector_on_ground_truth, but not every ground-truth frame lists baseline_detections"
        );
    }
    Ok(())
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<Verdict> {
    let out = cfg.out.clone().context("no output directory: pass --out or set `out` in the config")?;
    let layout = Layout { root: out };

    let (dataset, gate_cfg, sweep, palette) = stage("validate", || {
        let path = cfg.dataset.as_deref().context("no dataset: pass --dataset or set `dataset` in the config")?;
        let dataset = Dataset::load(path)?;
        dataset.validate()?;
        if cfg.scene.is_some() != cfg.manifest.is_some() {
            bail!("--scene and --manifest must be given together");
        }
        for p in [&cfg.scene, &cfg.manifest, &cfg.edits, &cfg.sweep, &cfg.gate_config].into_iter().flatten() {
            if !p.is_file() {
                bail!("missing file {}", p.display());
            }
        }
        let gate_cfg = match &cfg.gate_config {
            Some(p) => GateConfig::load(p)?,
            None => GateConfig::default(),
        };
        let sweep = match &cfg.sweep {
            Some(p) => SweepSpec::load(p)?,
            None => SweepSpec::default(),
        };
        sweep.validate().context("sweep spec")?;
        let palette = match &dataset.doc.palette {
            Some(p) => Palette::load(p)?,
            None => pipeline::default_palette(),
        };
        pipeline::create_dir(&layout.root)?;
        Ok((dataset, gate_cfg, sweep, palette))
    })?;
    let entry = &dataset.doc.scenes[0];

    let (scene, edit_hash) = stage("edit", || {
        let (splat, manifest) = match (&cfg.scene, &cfg.manifest) {
            (Some(s), Some(m)) => (s.clone(), m.clone()),
            _ => (entry.splat.clone(), entry.manifest.clone()),
        };
        let scene = load_scene(&splat, &manifest).with_context(|| format!("scene {}", splat.display()))?;
        let dir = layout.scene_dir();
        pipeline::create_dir(&dir)?;
        let (scene, hash) = match &cfg.edits {
            Some(script) => {
                let edited = pipeline::edit_scene(&scene, script)?;
                write_json(&dir.join("edit_log.json"), &edited.log)?;
                (edited.scene, Some(edited.log.script_hash))
            }
            None => (scene, None),
        };
        save_scene(&scene, dir.join("scene.ply"), dir.join("scene.json"))?;
        Ok((scene, hash))
    })?;

    let (training, poses) = stage("sample_poses", || {
        let training = load_trajectory(&entry.trajectory)
            .with_context(|| format!("trajectory {}", entry.trajectory.display()))?;
        let poses = pipeline::sample_poses(&training, &sweep)?;
        write_json(&layout.poses(), &poses)?;
        Ok((training, poses))
    })?;

    let cameras = &dataset.doc.cameras;
    let index: RenderIndex = stage("render", || {
        pipeline::render_all(&scene, &poses, cameras, &palette, &layout.renders())
    })?;

    let caveats = stage("coverage", || {
        let opts = CoverageOptions {
            min_observations: cfg.min_observations.unwrap_or(DEFAULT_MIN_OBSERVATIONS),
            occlusion_aware: cfg.occlusion_aware.unwrap_or(false),
        };
        let doc = pipeline::coverage_tags(&scene, &training, &cameras[0], &pipeline::dynamic_nodes(&scene), &opts)?;
        write_json(&layout.coverage(), &doc)?;
        pipeline::fidelity_caveats(&scene, &doc, &index, &poses, cameras)
    })?;

    let eval = stage("evaluate", || {
        let settings = EvalSettings {
            scenario_id: scenario_id(cfg, &dataset.path),
            iou_threshold: cfg.iou_threshold.unwrap_or(DEFAULT_IOU_THRESHOLD),
            scene_hash: Some(scene_hash(&scene)),
            edit_script_hash: edit_hash.clone(),
            caveats: caveats.clone(),
            diff_dir: Some(&layout.diff()),
        };
        pipeline::evaluate(&dataset, &layout.renders(), &index, &settings)
    })?;

    let decision = stage("gate", || {
        check_detector_baseline(&gate_cfg, eval.baseline.provenance.detector_source.as_deref())?;
        Ok(apply_gate(&eval.observed, Baseline::Report(&eval.baseline), &gate_cfg)?)
    })?;

    stage("emit", || {
        emit_report(&eval.baseline, None, layout.baseline())?;
        emit_report(&eval.observed, Some(&decision), &layout.root)?;
        Ok(())
    })?;
    Ok(decision.overall)
}

pub fn scenario_id(cfg: &RunConfig, dataset: &Path) -> String {
    cfg.scenario_id.clone().unwrap_or_else(|| {
        dataset
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    })
}
