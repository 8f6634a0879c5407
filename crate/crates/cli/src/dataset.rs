//! Dataset directory description: scenes, cameras and ground-truth frames.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use splatgate_core::scene::{make_transform, CameraModel, RigidTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub splat: PathBuf,
    pub manifest: PathBuf,
    pub trajectory: PathBuf,
}

/// Rig mounting of a camera relative to the trajectory pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrinsic {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default = "unit_quat")]
    pub quaternion: [f64; 4],
}

fn unit_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraEntry {
    pub id: String,
    #[serde(flatten)]
    pub model: CameraModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrinsic: Option<Extrinsic>,
}

impl CameraEntry {
    pub fn mount(&self) -> Result<RigidTransform> {
        match &self.extrinsic {
            None => Ok(RigidTransform::identity()),
            Some(e) => make_transform(e.translation, e.quaternion)
                .with_context(|| format!("camera {}: invalid extrinsic", self.id)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub frame_id: String,
    /// Camera id; defaults to the first camera.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<String>,
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<PathBuf>,
    /// Detector output on the ground-truth image, for `detector_on_ground_truth` gates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_detections: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Base for relative paths, itself relative to the manifest file.
    #[serde(default)]
    pub root: PathBuf,
    pub scenes: Vec<SceneEntry>,
    pub cameras: Vec<CameraEntry>,
    /// Class palette for every mask in the dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<PathBuf>,
    #[serde(default)]
    pub ground_truth: Vec<GroundTruthEntry>,
}

/// A manifest with every path made absolute against its root.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub path: PathBuf,
    pub doc: DatasetManifest,
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read dataset manifest {}", path.display()))?;
        let mut doc: DatasetManifest =
            serde_json::from_str(&text).with_context(|| format!("malformed dataset manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).join(&doc.root);
        let fix = |p: &mut PathBuf| *p = base.join(&*p);
        for s in &mut doc.scenes {
            fix(&mut s.splat);
            fix(&mut s.manifest);
            fix(&mut s.trajectory);
        }
        if let Some(p) = &mut doc.palette {
            fix(p);
        }
        for g in &mut doc.ground_truth {
            fix(&mut g.image);
            for p in [&mut g.mask, &mut g.detections, &mut g.baseline_detections].into_iter().flatten() {
                fix(p);
            }
        }
        doc.root = base;
        Ok(Self {
            path: path.to_path_buf(),
            doc,
        })
    }

    /// Checks that referenced files exist and frame ids are unique per camera.
    pub fn validate(&self) -> Result<()> {
        let doc = &self.doc;
        if doc.scenes.is_empty() {
            bail!("{}: no scenes listed", self.path.display());
        }
        if doc.cameras.is_empty() {
            bail!("{}: no cameras listed", self.path.display());
        }
        let mut ids = BTreeSet::new();
        for c in &doc.cameras {
            if !ids.insert(c.id.as_str()) {
                bail!("{}: duplicate camera id {}", self.path.display(), c.id);
            }
            c.model
                .validate()
                .with_context(|| format!("camera {} in {}", c.id, self.path.display()))?;
            c.mount()?;
        }
        let mut paths: Vec<&Path> = Vec::new();
        for s in &doc.scenes {
            paths.extend([s.splat.as_path(), s.manifest.as_path(), s.trajectory.as_path()]);
        }
        paths.extend(doc.palette.as_deref());
        let mut seen = BTreeSet::new();
        for g in &doc.ground_truth {
            let cam = self.camera_of(g)?;
            if !seen.insert((cam.id.as_str(), g.frame_id.as_str())) {
                bail!("{}: frame id {} appears twice for camera {}", self.path.display(), g.frame_id, cam.id);
            }
            paths.push(&g.image);
            paths.extend(g.mask.as_deref());
            paths.extend(g.detections.as_deref());
            paths.extend(g.baseline_detections.as_deref());
        }
        for p in paths {
            if !p.is_file() {
                bail!("missing file {}", p.display());
            }
        }
        Ok(())
    }

    pub fn camera_of(&self, g: &GroundTruthEntry) -> Result<&CameraEntry> {
        match &g.camera {
            None => Ok(&self.doc.cameras[0]),
            Some(id) => self
                .doc
                .cameras
                .iter()
                .find(|c| &c.id == id)
                .with_context(|| format!("frame {}: unknown camera {id}", g.frame_id)),
        }
    }

    /// Ground-truth entry for a rendered frame key (`camera/frame` with several cameras).
    pub fn ground_truth(&self, key: &str) -> Option<&GroundTruthEntry> {
        let multi = self.doc.cameras.len() > 1;
        self.doc.ground_truth.iter().find(|g| {
            if multi {
                let cam = g.camera.as_deref().unwrap_or(&self.doc.cameras[0].id);
                frame_key(Some(cam), &g.frame_id) == key
            } else {
                g.frame_id == key
            }
        })
    }
}

/// Frame key used for rendered artifacts; prefixed by camera id with several cameras.
pub fn frame_key(camera: Option<&str>, frame_id: &str) -> String {
    match camera {
        Some(c) => format!("{c}.{frame_id}"),
        None => frame_id.to_string(),
    }
}
