//! Pipeline stages shared by the subcommands and `run`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use splatgate_core::coverage::{check_view_validity, compute_coverage, CoverageOptions, CoverageTag};
use splatgate_core::edit::{apply_edit_script, load_edit_script};
use splatgate_core::metrics::{
    diff_map, load_class_mask, save_class_mask, Detection, DetectionClass, DetectionSet, Image, Palette,
    RegionMask, SegMaskPair,
};
use splatgate_core::render::{read_raw_buffer, render_frame, write_raw_buffer, RenderedFrame, INSTANCE_NONE};
use splatgate_core::report::{
    evaluate_batch, regions_from_segmentation, DetectorBaseline, EvalConfig, FrameInput, MetricReport, Provenance,
};
use splatgate_core::sampler::{sample_sweep, SweepSpec};
use splatgate_core::scene::{
    make_transform, split_transform, CameraPose, NodeClass, SceneGraph,
};

use crate::dataset::{frame_key, CameraEntry, Dataset};

/// Nodes smaller than this many pixels get no detection box.
pub const MIN_BOX_PIXELS: usize = 4;
/// Render opacity above which a pixel counts as non-sky when no mask is supplied.
pub const NON_SKY_ALPHA: f64 = 0.5;

pub const DETECTOR_RENDER_BOXES: &str = "render_instance_boxes";
pub const MASK_GT_SEGMENTATION: &str = "ground_truth_segmentation";
pub const MASK_RENDER_ALPHA: &str = "renderer_alpha";

/// Runs `f` and tags any error with the stage name.
pub fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().with_context(|| format!("stage `{name}` failed"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

/// Camera file: either a bare camera model or a dataset camera entry.
pub fn load_camera(path: &Path) -> Result<CameraEntry> {
    let value: serde_json::Value = read_json(path)?;
    let entry = if value.get("id").is_some() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|model| CameraEntry {
            id: "camera".into(),
            model,
            extrinsic: None,
        })
    }
    .with_context(|| format!("malformed camera {}", path.display()))?;
    entry.model.validate().with_context(|| format!("camera {}", path.display()))?;
    Ok(entry)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditLog {
    pub script: PathBuf,
    pub script_hash: String,
    pub input_scene_hash: String,
    pub output_scene_hash: String,
    pub applied: Vec<String>,
    pub warnings: Vec<String>,
}

pub struct Edited {
    pub scene: SceneGraph,
    pub log: EditLog,
}

pub fn edit_scene(scene: &SceneGraph, script_path: &Path) -> Result<Edited> {
    let script = load_edit_script(script_path)?;
    let base = script_path.parent().unwrap_or(Path::new("."));
    let outcome = apply_edit_script(scene, &script, base).with_context(|| format!("edit script {}", script_path.display()))?;
    let log = EditLog {
        script: script_path.to_path_buf(),
        script_hash: script.hash(),
        input_scene_hash: splatgate_core::scene::scene_hash(scene),
        output_scene_hash: splatgate_core::scene::scene_hash(&outcome.scene),
        applied: outcome.log,
        warnings: outcome.warnings,
    };
    Ok(Edited {
        scene: outcome.scene,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePose {
    pub frame_id: String,
    pub direction: String,
    pub bin: String,
    pub magnitude: f64,
    pub time: f64,
    pub translation: [f64; 3],
    /// `(w, x, y, z)`.
    pub quaternion: [f64; 4],
}

impl FramePose {
    pub fn camera_pose(&self) -> Result<CameraPose> {
        let pose = make_transform(self.translation, self.quaternion)
            .with_context(|| format!("frame {}: invalid pose", self.frame_id))?;
        Ok(CameraPose::new(self.time, pose))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseSet {
    pub frames: Vec<FramePose>,
}

pub fn sample_poses(training: &[CameraPose], spec: &SweepSpec) -> Result<PoseSet> {
    let bins = sample_sweep(training, spec)?;
    let mut frames = Vec::new();
    for bin in &bins {
        for (k, p) in bin.poses.iter().enumerate() {
            let (translation, quaternion) = split_transform(&p.pose);
            frames.push(FramePose {
                frame_id: bin.frame_id(k),
                direction: bin.direction.as_str().into(),
                bin: bin.label.clone(),
                magnitude: bin.magnitude,
                time: p.time,
                translation,
                quaternion,
            });
        }
    }
    Ok(PoseSet { frames })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRecord {
    /// Artifact stem; camera-prefixed with several cameras.
    pub key: String,
    pub frame_id: String,
    pub camera: String,
    pub direction: String,
    pub bin: String,
    pub magnitude: f64,
    pub time: f64,
    pub image: String,
    pub instance: String,
    pub alpha: String,
    pub mask: String,
    pub detections: String,
    /// Nodes winning at least one pixel.
    pub visible_nodes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderIndex {
    pub scene_hash: String,
    pub frames: Vec<RenderRecord>,
}

pub const RENDER_INDEX: &str = "index.json";

/// Palette index for each node class, plus the index for empty pixels.
struct ClassMap {
    sky: u16,
    background: u16,
    vehicle: u16,
    human: u16,
}

impl ClassMap {
    fn new(palette: &Palette) -> Result<Self> {
        let first = |names: &[&str]| palette.indices_named(names).first().copied();
        let sky = first(&["sky"]).context("palette has no `sky` class")?;
        let background = first(&["background", "static", "road", "building"])
            .context("palette has no background class (`background`, `static`, `road` or `building`)")?;
        Ok(Self {
            sky,
            background,
            vehicle: first(&["vehicle", "car", "truck", "bus"]).unwrap_or(background),
            human: first(&["human", "person", "pedestrian", "rider"]).unwrap_or(background),
        })
    }

    fn mask(&self, frame: &RenderedFrame, scene: &SceneGraph) -> Vec<u16> {
        let class_of: Vec<u16> = frame
            .node_ids
            .iter()
            .map(|id| match scene.node(id).map(|n| n.class) {
                Some(NodeClass::Vehicle) => self.vehicle,
                Some(NodeClass::Pedestrian) => self.human,
                _ => self.background,
            })
            .collect();
        frame
            .instance
            .iter()
            .map(|&i| if i == INSTANCE_NONE { self.sky } else { class_of[i as usize] })
            .collect()
    }
}

/// Default palette when neither a dataset nor a palette file is given.
pub fn default_palette() -> Palette {
    Palette::new(["sky", "background", "vehicle", "human"])
}

/// Tight boxes around each dynamic node's pixels in the instance raster.
pub fn instance_boxes(frame: &RenderedFrame, scene: &SceneGraph, key: &str) -> DetectionSet {
    let n = frame.node_ids.len();
    let mut bounds = vec![(usize::MAX, usize::MAX, 0usize, 0usize, 0usize); n];
    for (i, &id) in frame.instance.iter().enumerate() {
        if id == INSTANCE_NONE {
            continue;
        }
        let (x, y) = (i % frame.width, i / frame.width);
        let b = &mut bounds[id as usize];
        b.0 = b.0.min(x);
        b.1 = b.1.min(y);
        b.2 = b.2.max(x);
        b.3 = b.3.max(y);
        b.4 += 1;
    }
    let detections = frame
        .node_ids
        .iter()
        .zip(&bounds)
        .filter(|(_, b)| b.4 >= MIN_BOX_PIXELS)
        .filter_map(|(id, b)| {
            let class = match scene.node(id)?.class {
                NodeClass::Vehicle => DetectionClass::Vehicle,
                NodeClass::Pedestrian => DetectionClass::Human,
                _ => return None,
            };
            Some(Detection {
                class,
                bbox: [b.0 as f64, b.1 as f64, (b.2 - b.0 + 1) as f64, (b.3 - b.1 + 1) as f64],
                score: 1.0,
            })
        })
        .collect();
    DetectionSet {
        image_id: key.to_string(),
        width: Some(frame.width as u32),
        height: Some(frame.height as u32),
        detections,
    }
}

fn visible_nodes(frame: &RenderedFrame) -> Vec<String> {
    let mut hit = vec![false; frame.node_ids.len()];
    for &i in &frame.instance {
        if i != INSTANCE_NONE {
            hit[i as usize] = true;
        }
    }
    frame
        .node_ids
        .iter()
        .zip(hit)
        .filter(|(_, h)| *h)
        .map(|(id, _)| id.clone())
        .collect()
}

/// Renders every pose through every camera into `out`, one frame per rayon task.
pub fn render_all(
    scene: &SceneGraph,
    poses: &PoseSet,
    cameras: &[CameraEntry],
    palette: &Palette,
    out: &Path,
) -> Result<RenderIndex> {
    create_dir(out)?;
    let classes = ClassMap::new(palette)?;
    let multi = cameras.len() > 1;
    let mut jobs = Vec::new();
    for cam in cameras {
        let mount = cam.mount()?;
        for f in &poses.frames {
            jobs.push((cam, mount, f));
        }
    }
    let frames: Vec<RenderRecord> = jobs
        .par_iter()
        .map(|(cam, mount, f)| -> Result<RenderRecord> {
            let base = f.camera_pose()?;
            let pose = CameraPose::new(base.time, base.pose * mount);
            let frame = render_frame(scene, &cam.model, &pose);
            let key = frame_key(multi.then_some(cam.id.as_str()), &f.frame_id);
            let rec = RenderRecord {
                key: key.clone(),
                frame_id: f.frame_id.clone(),
                camera: cam.id.clone(),
                direction: f.direction.clone(),
                bin: f.bin.clone(),
                magnitude: f.magnitude,
                time: f.time,
                image: format!("{key}.png"),
                instance: format!("{key}.instance.png"),
                alpha: format!("{key}.alpha.bin"),
                mask: format!("{key}.mask.png"),
                detections: format!("{key}.detections.json"),
                visible_nodes: visible_nodes(&frame),
            };
            frame.save_rgb_png(out.join(&rec.image))?;
            frame.save_instance_png(out.join(&rec.instance))?;
            let alpha_path = out.join(&rec.alpha);
            write_raw_buffer(&frame.alpha_buffer(), &alpha_path)
                .with_context(|| format!("cannot write {}", alpha_path.display()))?;
            save_class_mask(out.join(&rec.mask), frame.width, frame.height, &classes.mask(&frame, scene))?;
            instance_boxes(&frame, scene, &key).save(out.join(&rec.detections))?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    let index = RenderIndex {
        scene_hash: splatgate_core::scene::scene_hash(scene),
        frames,
    };
    write_json(&out.join(RENDER_INDEX), &index)?;
    Ok(index)
}

pub struct Evaluation {
    pub observed: MetricReport,
    pub baseline: MetricReport,
}

pub struct EvalSettings<'a> {
    pub scenario_id: String,
    pub iou_threshold: f64,
    pub scene_hash: Option<String>,
    pub edit_script_hash: Option<String>,
    pub caveats: Vec<String>,
    pub diff_dir: Option<&'a Path>,
}

struct Inputs {
    observed: FrameInput,
    baseline: FrameInput,
    mask_source: &'static str,
    used_baseline_detector: Option<bool>,
}

fn frame_inputs(
    dataset: &Dataset,
    palette: Option<&Palette>,
    renders: &Path,
    rec: &RenderRecord,
    diff_dir: Option<&Path>,
) -> Result<Inputs> {
    let mut observed = FrameInput {
        frame_id: rec.key.clone(),
        direction: rec.direction.clone(),
        bin: rec.bin.clone(),
        magnitude: Some(rec.magnitude),
        ..Default::default()
    };
    let Some(gt) = dataset.ground_truth(&rec.key) else {
        // no reference: the batch records it as skipped
        return Ok(Inputs {
            baseline: observed.clone(),
            observed,
            mask_source: MASK_RENDER_ALPHA,
            used_baseline_detector: None,
        });
    };
    let rendered = Image::load(renders.join(&rec.image))?;
    let reference = Image::load(&gt.image)?;
    if let Some(dir) = diff_dir {
        if rendered.dims() == reference.dims() {
            diff_map(&rendered, &reference)?.save_heatmap(dir.join(format!("{}.png", rec.key)))?;
        }
    }
    let (w, h) = reference.dims();
    let mut mask_source = MASK_RENDER_ALPHA;
    match (&gt.mask, palette) {
        (Some(mask_path), Some(palette)) => {
            let (mw, mh, gt_mask) = load_class_mask(mask_path)?;
            let (pw, ph, pred_mask) = load_class_mask(renders.join(&rec.mask))?;
            if (mw, mh) != (w, h) || (pw, ph) != (w, h) {
                bail!("frame {}: mask size differs from image size", rec.key);
            }
            observed.regions = regions_from_segmentation(w, h, &gt_mask, palette);
            observed.segmentation = Some(SegMaskPair {
                width: w,
                height: h,
                predicted: pred_mask,
                ground_truth: gt_mask,
                palette: palette.clone(),
            });
            mask_source = MASK_GT_SEGMENTATION;
        }
        (Some(mask_path), None) => bail!("{}: a mask needs a dataset palette", mask_path.display()),
        (None, _) => {
            let alpha_path = renders.join(&rec.alpha);
            let buf = read_raw_buffer(&alpha_path).with_context(|| format!("cannot read {}", alpha_path.display()))?;
            if (buf.width as usize, buf.height as usize) == (w, h) && buf.channels == 1 {
                let alpha: Vec<f64> = buf.data.iter().map(|&v| v as f64).collect();
                observed.regions = vec![RegionMask::non_sky_from_alpha(w, h, &alpha, NON_SKY_ALPHA)];
            }
        }
    }
    let mut baseline = observed.clone();
    baseline.rendered = Some(reference.clone());
    baseline.ground_truth = Some(reference.clone());
    if let Some(seg) = &mut baseline.segmentation {
        seg.predicted = seg.ground_truth.clone();
    }
    observed.rendered = Some(rendered);
    observed.ground_truth = Some(reference);
    let mut used_baseline_detector = None;
    if let Some(det_path) = &gt.detections {
        let reference = DetectionSet::load(det_path)?;
        let predicted = DetectionSet::load(renders.join(&rec.detections))?;
        let base_pred = match &gt.baseline_detections {
            Some(p) => DetectionSet::load(p)?,
            None => reference.clone(),
        };
        used_baseline_detector = Some(gt.baseline_detections.is_some());
        observed.detections = Some((predicted, reference.clone()));
        baseline.detections = Some((base_pred, reference));
    }
    Ok(Inputs {
        observed,
        baseline,
        mask_source,
        used_baseline_detector,
    })
}

fn summarize_source<'a>(values: impl Iterator<Item = &'a str>) -> Option<String> {
    let mut all: Vec<&str> = values.collect();
    all.sort_unstable();
    all.dedup();
    match all.len() {
        0 => None,
        1 => Some(all[0].to_string()),
        _ => Some(format!("mixed: {}", all.join(", "))),
    }
}

/// Scores renders against ground truth and builds the paired ground-truth baseline.
pub fn evaluate(dataset: &Dataset, renders: &Path, index: &RenderIndex, settings: &EvalSettings) -> Result<Evaluation> {
    let palette = match &dataset.doc.palette {
        Some(p) => Some(Palette::load(p)?),
        None => None,
    };
    if let Some(dir) = settings.diff_dir {
        create_dir(dir)?;
    }
    let inputs: Vec<Inputs> = index
        .frames
        .par_iter()
        .map(|rec| {
            frame_inputs(dataset, palette.as_ref(), renders, rec, settings.diff_dir)
                .with_context(|| format!("frame {}", rec.key))
        })
        .collect::<Result<_>>()?;
    let mask_source = summarize_source(
        inputs
            .iter()
            .filter(|i| i.observed.ground_truth.is_some())
            .map(|i| i.mask_source),
    );
    let with_dets: Vec<bool> = inputs.iter().filter_map(|i| i.used_baseline_detector).collect();
    let baseline_detector = if with_dets.is_empty() {
        None
    } else if with_dets.iter().all(|&b| b) {
        Some(DetectorBaseline::DetectorOnGroundTruth)
    } else {
        Some(DetectorBaseline::SimulatorLabels)
    };
    let provenance = Provenance {
        scene_hash: settings.scene_hash.clone(),
        edit_script_hash: settings.edit_script_hash.clone(),
        detector_source: with_dets.first().map(|_| DETECTOR_RENDER_BOXES.to_string()),
        mask_source: mask_source.clone(),
    };
    let observed_cfg = EvalConfig {
        scenario_id: settings.scenario_id.clone(),
        iou_threshold: settings.iou_threshold,
        provenance,
        caveats: settings.caveats.clone(),
    };
    let baseline_cfg = EvalConfig {
        scenario_id: format!("{}.ground_truth", settings.scenario_id),
        iou_threshold: settings.iou_threshold,
        provenance: Provenance {
            scene_hash: None,
            edit_script_hash: None,
            detector_source: baseline_detector.map(|d| detector_label(d).to_string()),
            mask_source,
        },
        caveats: Vec::new(),
    };
    let (obs, base): (Vec<FrameInput>, Vec<FrameInput>) = inputs.into_iter().map(|i| (i.observed, i.baseline)).unzip();
    Ok(Evaluation {
        observed: evaluate_batch(&obs, &observed_cfg)?,
        baseline: evaluate_batch(&base, &baseline_cfg)?,
    })
}

pub fn detector_label(d: DetectorBaseline) -> &'static str {
    match d {
        DetectorBaseline::SimulatorLabels => "simulator_labels",
        DetectorBaseline::DetectorOnGroundTruth => "detector_on_ground_truth",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageDoc {
    pub camera: String,
    pub nodes: Vec<CoverageTag>,
}

pub fn coverage_tags(
    scene: &SceneGraph,
    training: &[CameraPose],
    camera: &CameraEntry,
    nodes: &[String],
    opts: &CoverageOptions,
) -> Result<CoverageDoc> {
    let mount = camera.mount()?;
    let mounted: Vec<CameraPose> = training.iter().map(|p| CameraPose::new(p.time, p.pose * mount)).collect();
    let tags = nodes
        .iter()
        .map(|id| compute_coverage(scene, &mounted, &camera.model, id, opts).with_context(|| format!("node {id}")))
        .collect::<Result<_>>()?;
    Ok(CoverageDoc {
        camera: camera.id.clone(),
        nodes: tags,
    })
}

pub fn dynamic_nodes(scene: &SceneGraph) -> Vec<String> {
    scene.nodes.iter().filter(|n| !n.is_background()).map(|n| n.id.clone()).collect()
}

/// Caveats for rendered frames that look at a node from an under-observed sector,
/// plus the rigid-pedestrian caveat.
pub fn fidelity_caveats(
    scene: &SceneGraph,
    coverage: &CoverageDoc,
    index: &RenderIndex,
    poses: &PoseSet,
    cameras: &[CameraEntry],
) -> Result<Vec<String>> {
    let by_frame: BTreeMap<&str, &FramePose> = poses.frames.iter().map(|f| (f.frame_id.as_str(), f)).collect();
    let mut out = Vec::new();
    for tag in &coverage.nodes {
        let mut frames = 0usize;
        let mut sectors = Vec::new();
        for rec in &index.frames {
            if !rec.visible_nodes.contains(&tag.node_id) {
                continue;
            }
            let Some(f) = by_frame.get(rec.frame_id.as_str()) else { continue };
            let cam = cameras.iter().find(|c| c.id == rec.camera).context("render index names an unknown camera")?;
            let base = f.camera_pose()?;
            let pose = CameraPose::new(base.time, base.pose * cam.mount()?);
            let v = check_view_validity(tag, scene, &tag.node_id, &pose)?;
            if !v.valid {
                frames += 1;
                sectors.push(v.sector);
            }
        }
        if frames > 0 {
            sectors.sort_unstable();
            sectors.dedup();
            let list: Vec<String> = sectors.iter().map(|s| s.to_string()).collect();
            out.push(format!(
                "node {}: {frames} rendered frame(s) view it from sectors with fewer than {} training observations (sectors {})",
                tag.node_id,
                tag.min_observations,
                list.join(", ")
            ));
        }
    }
    for n in &scene.nodes {
        if n.has_rigidity_caveat() {
            out.push(format!(
                "node {}: pedestrian represented as a rigid body; limb articulation is not modeled",
                n.id
            ));
        }
    }
    Ok(out)
}
