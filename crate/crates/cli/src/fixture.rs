//! `synth`: writes a small seeded street dataset that exercises the whole pipeline.
//! Ground truth is rendered from the clean scene; the scene handed to the pipeline
//! can be degraded by position jitter to stand in for an imperfect reconstruction.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::Rng;
use splatgate_core::report::GateConfig;
use splatgate_core::sampler::{Direction, OffsetSpec, SweepSpec};
use splatgate_core::scene::{save_scene, save_trajectory, CameraModel, SceneGraph};
use splatgate_core::synth::{rng, street_scene, street_trajectory};

use crate::config::RunConfig;
use crate::dataset::{CameraEntry, DatasetManifest, GroundTruthEntry, SceneEntry};
use crate::pipeline::{self, write_json};

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub seed: u64,
    pub frames: usize,
    /// Lateral sweep with a single 0 m bin instead of the default sweep.
    pub zero_offset: bool,
    /// Half-width of uniform position noise applied to the pipeline's scene, meters.
    pub jitter: f64,
}

pub fn camera() -> CameraModel {
    CameraModel::centered(96, 64, 80.0)
}

fn jittered(scene: &SceneGraph, seed: u64, amount: f64) -> SceneGraph {
    let mut out = scene.clone();
    if amount <= 0.0 {
        return out;
    }
    let mut r = rng(seed ^ 0x6a17);
    for p in out.gaussians.position.iter_mut() {
        for v in p.iter_mut() {
            *v += r.random_range(-amount..amount) as f32;
        }
    }
    out
}

pub fn write_dataset(dir: &Path, opts: &SynthOptions) -> Result<PathBuf> {
    let gt_dir = dir.join("gt");
    pipeline::create_dir(&gt_dir)?;
    let truth = street_scene(opts.seed);
    let scene = jittered(&truth, opts.seed, opts.jitter);
    save_scene(&scene, dir.join("scene.ply"), dir.join("scene.json"))?;
    let training = street_trajectory(opts.frames, truth.frame_rate, 5.0);
    save_trajectory(&training, dir.join("train.json"))?;

    let sweep = if opts.zero_offset {
        SweepSpec {
            offsets: vec![OffsetSpec::new(Direction::Lateral).with_magnitudes(vec![0.0])],
            times: None,
        }
    } else {
        SweepSpec::default()
    };
    write_json(&dir.join("sweep.json"), &sweep)?;
    write_json(&dir.join("gate.json"), &GateConfig::default())?;
    let palette = pipeline::default_palette();
    write_json(&dir.join("palette.json"), &palette)?;

    let cam = CameraEntry {
        id: "front".into(),
        model: camera(),
        extrinsic: None,
    };
    let poses = pipeline::sample_poses(&training, &sweep)?;
    let index = pipeline::render_all(&truth, &poses, std::slice::from_ref(&cam), &palette, &gt_dir)?;
    // ground truth keeps only image, mask and labels
    for rec in &index.frames {
        for f in [&rec.instance, &rec.alpha] {
            fs::remove_file(gt_dir.join(f)).with_context(|| format!("cannot remove {f}"))?;
        }
    }
    fs::remove_file(gt_dir.join(pipeline::RENDER_INDEX))?;
    let ground_truth = index
        .frames
        .iter()
        .map(|rec| GroundTruthEntry {
            frame_id: rec.frame_id.clone(),
            camera: None,
            image: Path::new("gt").join(&rec.image),
            mask: Some(Path::new("gt").join(&rec.mask)),
            detections: Some(Path::new("gt").join(&rec.detections)),
            baseline_detections: None,
        })
        .collect();
    let manifest = DatasetManifest {
        root: PathBuf::new(),
        scenes: vec![SceneEntry {
            splat: "scene.ply".into(),
            manifest: "scene.json".into(),
            trajectory: "train.json".into(),
        }],
        cameras: vec![cam],
        palette: Some("palette.json".into()),
        ground_truth,
    };
    let dataset_path = dir.join("dataset.json");
    write_json(&dataset_path, &manifest)?;

    let run = RunConfig {
        scenario_id: Some(format!("street_seed{}", opts.seed)),
        dataset: Some("dataset.json".into()),
        sweep: Some("sweep.json".into()),
        gate_config: Some("gate.json".into()),
        out: Some("out".into()),
        ..Default::default()
    };
    let toml_text = toml::to_string(&run).context("cannot encode run config")?;
    let run_path = dir.join("run.toml");
    fs::write(&run_path, toml_text).with_context(|| format!("cannot write {}", run_path.display()))?;
    Ok(run_path)
}
