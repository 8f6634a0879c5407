//! Scene manifest documents (JSON).
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "frame_rate": 10.0,
//!   "time_span": [0.0, 1.0],
//!   "nodes": [
//!     {"id": "car_0", "class": "vehicle", "index_ranges": [[100, 200]],
//!      "heading": [1, 0, 0],
//!      "pose_track": [{"t": 0.0, "translation": [0, 0, 0], "quaternion": [1, 0, 0, 0]}]}
//!   ]
//! }
//! ```
//!
//! Gaussians not claimed by any node belong to the background node, which is
//! created with id `background` when the manifest does not list one.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::gaussians::GaussianSet;
use super::graph::{index_ranges, NodeClass, SceneGraph, SceneNode, BACKGROUND_ID};
use super::pose::{PoseKey, PoseKeyDoc};
use super::SceneError;
use crate::coverage::CoverageTag;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    MANIFEST_SCHEMA_VERSION
}

fn default_heading() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub frame_rate: f64,
    pub time_span: [f64; 2],
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    pub class: NodeClass,
    #[serde(default)]
    pub index_ranges: Vec<[u64; 2]>,
    #[serde(default = "default_heading")]
    pub heading: [f64; 3],
    #[serde(default)]
    pub pose_track: Vec<PoseKeyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageTag>,
}

pub fn load_scene_manifest(
    path: impl AsRef<Path>,
    set: GaussianSet,
) -> Result<SceneGraph, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SceneError::io(path, e))?;
    parse_scene_manifest(&text, set)
}

pub fn parse_scene_manifest(text: &str, set: GaussianSet) -> Result<SceneGraph, SceneError> {
    let doc: SceneManifest = serde_json::from_str(text)?;
    build_scene(&doc, set)
}

pub fn save_scene_manifest(scene: &SceneGraph, path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    fs::write(path, manifest_json(scene)?).map_err(|e| SceneError::io(path, e))
}

/// Canonical pretty-printed manifest text for a scene.
pub fn manifest_json(scene: &SceneGraph) -> Result<String, SceneError> {
    Ok(serde_json::to_string_pretty(&to_manifest(scene))? + "\n")
}

pub fn to_manifest(scene: &SceneGraph) -> SceneManifest {
    SceneManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        frame_rate: scene.frame_rate,
        time_span: scene.time_span,
        nodes: scene
            .nodes
            .iter()
            .map(|n| NodeDoc {
                id: n.id.clone(),
                class: n.class,
                index_ranges: index_ranges(&n.indices)
                    .into_iter()
                    .map(|[lo, hi]| [lo as u64, hi as u64])
                    .collect(),
                heading: [n.heading.x, n.heading.y, n.heading.z],
                pose_track: n.pose_track.iter().map(PoseKeyDoc::from).collect(),
                coverage: n.coverage.clone(),
            })
            .collect(),
    }
}

pub fn build_scene(doc: &SceneManifest, set: GaussianSet) -> Result<SceneGraph, SceneError> {
    let n = set.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut nodes = Vec::with_capacity(doc.nodes.len() + 1);

    for (ni, nd) in doc.nodes.iter().enumerate() {
        let mut indices = Vec::new();
        for &[lo, hi] in &nd.index_ranges {
            if lo > hi {
                return Err(SceneError::Validation(format!(
                    "node {}: index range [{lo}, {hi}) is reversed",
                    nd.id
                )));
            }
            if hi as usize > n {
                return Err(SceneError::IndexRange {
                    node: nd.id.clone(),
                    index: hi as usize - 1,
                    count: n,
                });
            }
            for i in lo as usize..hi as usize {
                if let Some(prev) = owner[i] {
                    let prev_id: &str = &doc.nodes[prev].id;
                    return Err(SceneError::Overlap {
                        first: prev_id.to_string(),
                        second: nd.id.clone(),
                        index: i,
                    });
                }
                owner[i] = Some(ni);
                indices.push(i as u32);
            }
        }
        indices.sort_unstable();

        let mut track = nd
            .pose_track
            .iter()
            .map(|k| {
                k.to_key().ok_or_else(|| {
                    SceneError::Validation(format!("node {}: invalid pose key at t={}", nd.id, k.t))
                })
            })
            .collect::<Result<Vec<PoseKey>, _>>()?;
        if track.is_empty() && nd.class == NodeClass::Background {
            track.push(PoseKey::identity(doc.time_span[0]));
        }

        let h = Vector3::from(nd.heading);
        if !(h.norm() > 0.0) || !h.iter().all(|v| v.is_finite()) {
            return Err(SceneError::Validation(format!("node {}: zero heading", nd.id)));
        }

        nodes.push(SceneNode {
            id: nd.id.clone(),
            class: nd.class,
            indices,
            pose_track: track,
            heading: h.normalize(),
            coverage: nd.coverage.clone(),
        });
    }

    let unlisted: Vec<u32> = owner
        .iter()
        .enumerate()
        .filter(|(_, o)| o.is_none())
        .map(|(i, _)| i as u32)
        .collect();
    match nodes.iter_mut().find(|n| n.is_background()) {
        Some(bg) => {
            bg.indices.extend(unlisted);
            bg.indices.sort_unstable();
        }
        None => {
            if nodes.iter().any(|n| n.id == BACKGROUND_ID) {
                return Err(SceneError::Validation(format!(
                    "node id {BACKGROUND_ID} is reserved for the background"
                )));
            }
            nodes.insert(0, SceneNode::background(unlisted, doc.time_span[0]));
        }
    }

    let scene = SceneGraph {
        gaussians: set,
        nodes,
        frame_rate: doc.frame_rate,
        time_span: doc.time_span,
    };
    scene.validate()?;
    Ok(scene)
}
