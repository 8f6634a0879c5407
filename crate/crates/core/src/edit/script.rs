//! Replayable edit scripts: `{"ops": [{"op", "node_id", "params"}]}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    inject_node, remove_node, set_trajectory, transform_node, EditError, TrajectorySpec,
    TransformMode,
};
use crate::scene::{load_scene, make_transform, RigidTransform, SceneError, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Remove,
    Transform,
    SetTrajectory,
    Inject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOp {
    pub op: OpKind,
    pub node_id: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
}

fn zero3() -> [f64; 3] {
    [0.0; 3]
}

fn unit_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Debug, Deserialize)]
struct TransformParams {
    #[serde(default = "zero3")]
    translation: [f64; 3],
    #[serde(default = "unit_quat")]
    quaternion: [f64; 4],
    #[serde(flatten)]
    mode: TransformMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectParams {
    source_splat: PathBuf,
    source_manifest: PathBuf,
    #[serde(default = "zero3")]
    translation: [f64; 3],
    #[serde(default = "unit_quat")]
    quaternion: [f64; 4],
    #[serde(default)]
    time_offset: f64,
}

#[derive(Debug, Clone)]
pub struct EditOutcome {
    pub scene: SceneGraph,
    /// One line per applied op.
    pub log: Vec<String>,
    pub warnings: Vec<String>,
}

impl EditScript {
    pub fn parse(text: &str) -> Result<Self, EditError> {
        serde_json::from_str(text).map_err(|e| EditError::Script(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("edit script serializes") + "\n"
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

pub fn load_edit_script(path: impl AsRef<Path>) -> Result<EditScript, EditError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SceneError::io(path, e))?;
    EditScript::parse(&text).map_err(|e| EditError::Script(format!("{}: {e}", path.display())))
}

fn params<T: serde::de::DeserializeOwned>(i: usize, op: &EditOp) -> Result<T, EditError> {
    serde_json::from_value(op.params.clone())
        .map_err(|e| EditError::Script(format!("op {i} ({:?} {}): {e}", op.op, op.node_id)))
}

fn transform(i: usize, t: [f64; 3], q: [f64; 4]) -> Result<RigidTransform, EditError> {
    make_transform(t, q).ok_or_else(|| {
        EditError::Script(format!("op {i}: invalid translation or non-unit quaternion"))
    })
}

/// Applies `script` in order. Relative inject paths resolve against `base_dir`.
pub fn apply_edit_script(
    scene: &SceneGraph,
    script: &EditScript,
    base_dir: &Path,
) -> Result<EditOutcome, EditError> {
    let mut current = scene.clone();
    let mut log = Vec::new();
    let mut warnings = Vec::new();
    for (i, op) in script.ops.iter().enumerate() {
        let id = op.node_id.as_str();
        current = match op.op {
            OpKind::Remove => {
                log.push(format!("remove {id}"));
                remove_node(&current, id)?
            }
            OpKind::Transform => {
                let p: TransformParams = params(i, op)?;
                let delta = transform(i, p.translation, p.quaternion)?;
                log.push(format!("transform {id} {:?}", p.mode));
                transform_node(&current, id, &delta, p.mode)?
            }
            OpKind::SetTrajectory => {
                let spec: TrajectorySpec = params(i, op)?;
                log.push(format!("set_trajectory {id}"));
                set_trajectory(&current, id, &spec)?
            }
            OpKind::Inject => {
                let p: InjectParams = params(i, op)?;
                let placement = transform(i, p.translation, p.quaternion)?;
                let source = load_scene(base_dir.join(&p.source_splat), base_dir.join(&p.source_manifest))?;
                let inj = inject_node(&current, &source, id, &placement, p.time_offset)?;
                log.push(format!("inject {id} as {}", inj.node_id));
                warnings.extend(inj.warnings);
                inj.scene
            }
        };
    }
    Ok(EditOutcome {
        scene: current,
        log,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Gaussian, GaussianSet, NodeClass, PoseKey, SceneNode};

    fn fixture() -> SceneGraph {
        let mut set = GaussianSet::new();
        for i in 0..4 {
            set.push(Gaussian {
                position: [i as f32, 0.0, 0.0],
                ..Default::default()
            });
        }
        let mut s = SceneGraph::static_scene(set, 10.0, [0.0, 1.0]);
        s.nodes[0].indices = vec![0, 1];
        s.nodes.push(
            SceneNode::new("car", NodeClass::Vehicle, vec![2, 3]).with_track(vec![
                PoseKey::identity(0.0),
                PoseKey::new(1.0, RigidTransform::translation(10.0, 0.0, 0.0)),
            ]),
        );
        s
    }

    #[test]
    fn parses_and_applies() {
        let text = r#"{"ops": [
            {"op": "transform", "node_id": "car",
             "params": {"translation": [0, 1, 0], "mode": "pre_compose_all_keys"}},
            {"op": "set_trajectory", "node_id": "car",
             "params": {"kind": "lane_change", "shift": 3.2, "t0": 0, "t1": 1}},
            {"op": "transform", "node_id": "car",
             "params": {"translation": [0, 0, 0], "mode": "replace_at_time", "time": 1.0}},
            {"op": "remove", "node_id": "car"}
        ]}"#;
        let script = EditScript::parse(text).unwrap();
        assert_eq!(script.ops.len(), 4);
        let out = apply_edit_script(&fixture(), &script, Path::new(".")).unwrap();
        assert_eq!(out.log.len(), 4);
        assert_eq!(out.scene.gaussians.len(), 2);
        assert_eq!(EditScript::parse(&script.to_json()).unwrap(), script);
    }

    #[test]
    fn bad_params_are_script_errors() {
        let text = r#"{"ops": [{"op": "transform", "node_id": "car", "params": {"mode": "spin"}}]}"#;
        let script = EditScript::parse(text).unwrap();
        let err = apply_edit_script(&fixture(), &script, Path::new(".")).unwrap_err();
        assert!(matches!(err, EditError::Script(_)), "{err}");
        assert!(EditScript::parse(r#"{"ops": [{"op": "explode", "node_id": "x"}]}"#).is_err());
    }

    #[test]
    fn inject_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let src = fixture();
        crate::scene::save_scene(&src, dir.path().join("src.ply"), dir.path().join("src.json")).unwrap();
        let text = r#"{"ops": [{"op": "inject", "node_id": "car",
            "params": {"source_splat": "src.ply", "source_manifest": "src.json", "translation": [0, 5, 0]}}]}"#;
        let out = apply_edit_script(&fixture(), &EditScript::parse(text).unwrap(), dir.path()).unwrap();
        assert_eq!(out.scene.gaussians.len(), 6);
        assert!(out.scene.node("car_1").is_some());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn hash_is_stable() {
        let s = EditScript::parse(r#"{"ops": [{"op": "remove", "node_id": "car"}]}"#).unwrap();
        assert_eq!(s.hash(), s.clone().hash());
        assert_eq!(s.hash().len(), 64);
    }
}
