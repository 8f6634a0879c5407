//! Training-free scene edits. Every operation takes `&SceneGraph` and returns a new,
//! validated scene; inputs are never mutated.

mod script;
mod trajectory;

pub use script::{apply_edit_script, load_edit_script, EditOp, EditOutcome, EditScript};
pub use trajectory::{right_of, sample_times, smoothstep, TrajectorySpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{pose_at, PoseKey, RigidTransform, SceneError, SceneGraph, SceneNode};

/// Tolerance used to match `replace_at_time` against existing key times.
pub const KEY_TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EditError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unsupported edit: {0}")]
    UnsupportedEdit(String),
    #[error("node `{node}` has no pose key at t={time}")]
    KeyNotFound { node: String, time: f64 },
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("edit script: {0}")]
    Script(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TransformMode {
    /// `key.pose = delta * key.pose` for every key.
    PreComposeAllKeys,
    /// The key at `time` is set to `delta`.
    ReplaceAtTime { time: f64 },
}

fn lookup<'a>(scene: &'a SceneGraph, id: &str) -> Result<(usize, &'a SceneNode), EditError> {
    scene
        .node_index(id)
        .map(|i| (i, &scene.nodes[i]))
        .ok_or_else(|| EditError::UnknownNode(id.to_string()))
}

fn finish(scene: SceneGraph) -> Result<SceneGraph, EditError> {
    scene.validate()?;
    Ok(scene)
}

pub fn remove_node(scene: &SceneGraph, node_id: &str) -> Result<SceneGraph, EditError> {
    let (pos, node) = lookup(scene, node_id)?;
    if node.is_background() {
        return Err(EditError::UnsupportedEdit("the background node cannot be removed".into()));
    }
    let n = scene.gaussians.len();
    let mut removed = vec![false; n];
    for &i in &node.indices {
        removed[i as usize] = true;
    }
    // old index -> new index for survivors
    let mut remap = vec![u32::MAX; n];
    let mut kept = Vec::with_capacity(n - node.indices.len());
    for i in 0..n {
        if !removed[i] {
            remap[i] = kept.len() as u32;
            kept.push(i as u32);
        }
    }
    let nodes = scene
        .nodes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pos)
        .map(|(_, nd)| SceneNode {
            indices: nd.indices.iter().map(|&i| remap[i as usize]).collect(),
            ..nd.clone()
        })
        .collect();
    finish(SceneGraph {
        gaussians: scene.gaussians.select(&kept),
        nodes,
        frame_rate: scene.frame_rate,
        time_span: scene.time_span,
    })
}

pub fn transform_node(
    scene: &SceneGraph,
    node_id: &str,
    delta: &RigidTransform,
    mode: TransformMode,
) -> Result<SceneGraph, EditError> {
    let (pos, node) = lookup(scene, node_id)?;
    if node.is_background() {
        return Err(EditError::UnsupportedEdit(
            "the background node keeps the identity pose".into(),
        ));
    }
    let mut track = node.pose_track.clone();
    match mode {
        TransformMode::PreComposeAllKeys => {
            for key in &mut track {
                key.pose = delta * key.pose;
            }
        }
        TransformMode::ReplaceAtTime { time } => {
            let key = track
                .iter_mut()
                .find(|k| (k.time - time).abs() <= KEY_TIME_EPS)
                .ok_or_else(|| EditError::KeyNotFound {
                    node: node_id.to_string(),
                    time,
                })?;
            key.pose = *delta;
        }
    }
    let mut out = scene.clone();
    out.nodes[pos].pose_track = track;
    finish(out)
}

pub fn set_trajectory(
    scene: &SceneGraph,
    node_id: &str,
    spec: &TrajectorySpec,
) -> Result<SceneGraph, EditError> {
    let (pos, node) = lookup(scene, node_id)?;
    if node.is_background() {
        return Err(EditError::UnsupportedEdit(
            "the background node keeps the identity pose".into(),
        ));
    }
    let track = spec.generate(node, scene.frame_rate, scene.time_span)?;
    let [a, b] = scene.time_span;
    if track
        .iter()
        .any(|k| k.time < a - KEY_TIME_EPS || k.time > b + KEY_TIME_EPS)
    {
        return Err(EditError::Validation(format!(
            "trajectory keys fall outside the scene time span [{a}, {b}]"
        )));
    }
    let mut out = scene.clone();
    out.nodes[pos].pose_track = track;
    finish(out)
}

/// Result of [`inject_node`].
#[derive(Debug, Clone)]
pub struct Injection {
    pub scene: SceneGraph,
    /// Id under which the node was inserted (suffixed on collision).
    pub node_id: String,
    pub warnings: Vec<String>,
}

pub fn inject_node(
    target: &SceneGraph,
    source: &SceneGraph,
    node_id: &str,
    placement: &RigidTransform,
    time_offset: f64,
) -> Result<Injection, EditError> {
    let (_, node) = lookup(source, node_id)?;
    if node.is_background() {
        return Err(EditError::UnsupportedEdit("background nodes cannot be injected".into()));
    }
    if !time_offset.is_finite() {
        return Err(EditError::Validation("time offset must be finite".into()));
    }
    let mut warnings = Vec::new();

    let mut id = node_id.to_string();
    let mut k = 1;
    while target.node(&id).is_some() {
        id = format!("{node_id}_{k}");
        k += 1;
    }
    if id != node_id {
        warnings.push(format!("node id `{node_id}` exists in target; injected as `{id}`"));
    }

    let shifted: Vec<PoseKey> = node
        .pose_track
        .iter()
        .map(|k| PoseKey::new(k.time + time_offset, placement * k.pose))
        .collect();
    let (track, clipped) = clip_track(&shifted, target.time_span);
    if clipped {
        warnings.push(format!(
            "track of `{id}` spans [{}, {}] after offset; clamped to target span [{}, {}]",
            shifted[0].time,
            shifted[shifted.len() - 1].time,
            target.time_span[0],
            target.time_span[1]
        ));
    }

    let base = target.gaussians.len() as u32;
    let mut gaussians = target.gaussians.clone();
    gaussians.extend_from(&source.gaussians.select(&node.indices));
    let injected = SceneNode {
        id: id.clone(),
        indices: (base..base + node.indices.len() as u32).collect(),
        pose_track: track,
        ..node.clone()
    };
    let mut nodes = target.nodes.clone();
    nodes.push(injected);
    let scene = finish(SceneGraph {
        gaussians,
        nodes,
        frame_rate: target.frame_rate,
        time_span: target.time_span,
    })?;
    Ok(Injection {
        scene,
        node_id: id,
        warnings,
    })
}

/// Restricts a track to `span`, inserting interpolated boundary keys.
/// Returns the clipped track and whether anything was cut.
fn clip_track(track: &[PoseKey], span: [f64; 2]) -> (Vec<PoseKey>, bool) {
    let [a, b] = span;
    let first = track[0].time;
    let last = track[track.len() - 1].time;
    if first >= a - KEY_TIME_EPS && last <= b + KEY_TIME_EPS {
        let keys = track
            .iter()
            .map(|k| PoseKey::new(k.time.clamp(a, b), k.pose))
            .collect();
        return (keys, false);
    }
    let (lo, hi) = (first.max(a), last.min(b));
    if lo > hi {
        let t = if last < a { a } else { b };
        return (vec![PoseKey::new(t, pose_at(track, t))], true);
    }
    let mut out = vec![PoseKey::new(lo, pose_at(track, lo))];
    out.extend(
        track
            .iter()
            .filter(|k| k.time > lo + KEY_TIME_EPS && k.time < hi - KEY_TIME_EPS)
            .copied(),
    );
    if hi > lo + KEY_TIME_EPS {
        out.push(PoseKey::new(hi, pose_at(track, hi)));
    }
    (out, true)
}
