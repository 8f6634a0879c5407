//! Scene model: Gaussian sets, scene graphs, cameras and their file formats.

mod camera;
mod error;
mod gaussians;
mod graph;
mod manifest;
mod ply;
mod pose;

pub use camera::{
    load_trajectory, look_at, save_trajectory, CameraModel, CameraPose, TrajectoryDoc,
    DEFAULT_NEAR_PLANE,
};
pub use error::SceneError;
pub use gaussians::{
    logit, sigmoid, Gaussian, GaussianSet, QUATERNION_NORM_TOLERANCE, SH_REST_LEN,
    SH_REST_PER_CHANNEL,
};
pub use graph::{index_ranges, NodeClass, SceneGraph, SceneNode, BACKGROUND_ID};
pub use manifest::{
    build_scene, load_scene_manifest, manifest_json, parse_scene_manifest, save_scene_manifest,
    to_manifest, NodeDoc, SceneManifest, MANIFEST_SCHEMA_VERSION,
};
pub use ply::{canonical_properties, encode_splat_ply, load_splat_ply, parse_splat_ply, save_splat_ply};
pub use pose::{
    interpolate_transform, is_strictly_increasing, make_transform, pose_at, slerp, split_transform, yaw_rotation,
    PoseKey, PoseKeyDoc, RigidTransform, WORLD_UP,
};

use std::path::Path;

use sha2::{Digest, Sha256};

/// Evaluates a node's pose track at `t` (clamped at the ends).
pub fn node_pose_at(node: &SceneNode, t: f64) -> RigidTransform {
    node.pose_at(t)
}

/// Loads a splat file and its manifest into a validated scene.
pub fn load_scene(
    splat: impl AsRef<Path>,
    manifest: impl AsRef<Path>,
) -> Result<SceneGraph, SceneError> {
    let set = load_splat_ply(splat)?;
    load_scene_manifest(manifest, set)
}

/// Writes a scene as a splat file plus manifest.
pub fn save_scene(
    scene: &SceneGraph,
    splat: impl AsRef<Path>,
    manifest: impl AsRef<Path>,
) -> Result<(), SceneError> {
    save_splat_ply(&scene.gaussians, splat)?;
    save_scene_manifest(scene, manifest)
}

/// Content hash over the canonical splat bytes and manifest text.
pub fn scene_hash(scene: &SceneGraph) -> String {
    let mut h = Sha256::new();
    h.update(encode_splat_ply(&scene.gaussians));
    h.update(manifest_json(scene).unwrap_or_default().as_bytes());
    hex::encode(h.finalize())
}
