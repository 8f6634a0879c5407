//! Viewing-angle coverage tags for scene nodes.
//!
//! Azimuth is measured in the node's ground plane, counter-clockwise from the
//! node heading: 0° is in front of the node, 180° directly behind. Sector `k`
//! covers `[10k - 5, 10k + 5)` degrees.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::render_frame;
use crate::scene::{CameraModel, CameraPose, SceneGraph, SceneNode};

pub const SECTOR_COUNT: usize = 36;
pub const SECTOR_WIDTH_DEG: f64 = 360.0 / SECTOR_COUNT as f64;
pub const DEFAULT_MIN_OBSERVATIONS: usize = 5;
/// Bounding spheres extend this many standard deviations past member means.
pub const SPHERE_SIGMAS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("training trajectory is empty")]
    EmptyTrajectory,
    #[error("coverage tag is for node {tag} but node {node} was requested")]
    TagMismatch { tag: String, node: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub center_deg: f64,
    pub observation_count: usize,
    /// Mean camera distance to the node center over the observations, meters.
    pub mean_distance: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTag {
    pub node_id: String,
    pub min_observations: usize,
    /// Threshold semantics; currently always `frame_count`.
    pub threshold_kind: String,
    pub occlusion_aware: bool,
    pub sectors: Vec<Sector>,
}

impl CoverageTag {
    fn empty(node_id: &str, opts: &CoverageOptions) -> Self {
        Self {
            node_id: node_id.to_string(),
            min_observations: opts.min_observations,
            threshold_kind: "frame_count".into(),
            occlusion_aware: opts.occlusion_aware,
            sectors: (0..SECTOR_COUNT)
                .map(|k| Sector {
                    center_deg: k as f64 * SECTOR_WIDTH_DEG,
                    observation_count: 0,
                    mean_distance: 0.0,
                    valid: false,
                })
                .collect(),
        }
    }

    pub fn total_observations(&self) -> usize {
        self.sectors.iter().map(|s| s.observation_count).sum()
    }

    pub fn valid_sectors(&self) -> Vec<usize> {
        (0..self.sectors.len()).filter(|&k| self.sectors[k].valid).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageOptions {
    pub min_observations: usize,
    /// Count a frame only if the node wins at least one pixel of the
    /// rendered instance raster.
    pub occlusion_aware: bool,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self {
            min_observations: DEFAULT_MIN_OBSERVATIONS,
            occlusion_aware: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewValidity {
    pub valid: bool,
    pub sector: usize,
    pub count: usize,
}

/// Sector containing an azimuth in degrees.
pub fn sector_of(azimuth_deg: f64) -> usize {
    let shifted = (azimuth_deg + SECTOR_WIDTH_DEG / 2.0).rem_euclid(360.0);
    ((shifted / SECTOR_WIDTH_DEG).floor() as usize) % SECTOR_COUNT
}

/// Node-frame bounding sphere `(center, radius)` of the member Gaussians.
pub fn bounding_sphere(scene: &SceneGraph, node: &SceneNode) -> Option<(Vector3<f64>, f64)> {
    if node.indices.is_empty() {
        return None;
    }
    let pts: Vec<(Vector3<f64>, f64)> = node
        .indices
        .iter()
        .map(|&i| {
            let g = scene.gaussians.get(i as usize);
            (Vector3::from(g.position.map(|v| v as f64)), g.scale().max())
        })
        .collect();
    let mut lo = pts[0].0;
    let mut hi = pts[0].0;
    for (p, _) in &pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let center = (lo + hi) / 2.0;
    let radius = pts
        .iter()
        .map(|(p, s)| (p - center).norm() + SPHERE_SIGMAS * s)
        .fold(0.0, f64::max);
    Some((center, radius))
}

/// Conservative sphere/frustum test (no far plane).
pub fn sphere_in_frustum(center_cam: &Vector3<f64>, radius: f64, cam: &CameraModel) -> bool {
    if center_cam.z < cam.near_plane - radius {
        return false;
    }
    // side planes through the optical center, inward normals
    let left = (0.0 - cam.cx) / cam.fx;
    let right = (cam.width as f64 - cam.cx) / cam.fx;
    let top = (0.0 - cam.cy) / cam.fy;
    let bottom = (cam.height as f64 - cam.cy) / cam.fy;
    let planes = [
        Vector3::new(1.0, 0.0, -left),
        Vector3::new(-1.0, 0.0, right),
        Vector3::new(0.0, 1.0, -top),
        Vector3::new(0.0, -1.0, bottom),
    ];
    planes
        .iter()
        .all(|n| n.dot(center_cam) / n.norm() >= -radius)
}

/// Azimuth (degrees in [0, 360)) and distance of a camera as seen from a
/// node at time `t`.
pub fn camera_azimuth(
    node: &SceneNode,
    center_local: &Vector3<f64>,
    camera: &CameraPose,
    t: f64,
) -> (f64, f64) {
    let node_pose = node.pose_at(t);
    let cam_local = node_pose.inverse_transform_point(&camera.position().into()).coords;
    let d = cam_local - center_local;
    let az = d.y.atan2(d.x) - node.heading.y.atan2(node.heading.x);
    (az.to_degrees().rem_euclid(360.0), d.norm())
}

pub fn compute_coverage(
    scene: &SceneGraph,
    training: &[CameraPose],
    cam: &CameraModel,
    node_id: &str,
    opts: &CoverageOptions,
) -> Result<CoverageTag, CoverageError> {
    let ni = scene
        .node_index(node_id)
        .ok_or_else(|| CoverageError::UnknownNode(node_id.to_string()))?;
    if training.is_empty() {
        return Err(CoverageError::EmptyTrajectory);
    }
    let node = &scene.nodes[ni];
    let mut tag = CoverageTag::empty(node_id, opts);
    let Some((center, radius)) = bounding_sphere(scene, node) else {
        return Ok(tag);
    };
    for pose in training {
        let t = scene.clamp_time(pose.time);
        let center_world = node.pose_at(t).transform_point(&center.into());
        let center_cam = pose.pose.inverse_transform_point(&center_world).coords;
        if !sphere_in_frustum(&center_cam, radius, cam) {
            continue;
        }
        if opts.occlusion_aware {
            let frame = render_frame(scene, cam, pose);
            if !frame.instance.iter().any(|&i| i as usize == ni) {
                continue;
            }
        }
        let (az, dist) = camera_azimuth(node, &center, pose, t);
        let s = &mut tag.sectors[sector_of(az)];
        s.observation_count += 1;
        s.mean_distance += (dist - s.mean_distance) / s.observation_count as f64;
    }
    for s in &mut tag.sectors {
        s.valid = s.observation_count >= opts.min_observations;
    }
    Ok(tag)
}

pub fn check_view_validity(
    tag: &CoverageTag,
    scene: &SceneGraph,
    node_id: &str,
    novel: &CameraPose,
) -> Result<ViewValidity, CoverageError> {
    if tag.node_id != node_id {
        return Err(CoverageError::TagMismatch {
            tag: tag.node_id.clone(),
            node: node_id.to_string(),
        });
    }
    let node = scene
        .node(node_id)
        .ok_or_else(|| CoverageError::UnknownNode(node_id.to_string()))?;
    let center = bounding_sphere(scene, node).map_or_else(Vector3::zeros, |(c, _)| c);
    let (az, _) = camera_azimuth(node, &center, novel, scene.clamp_time(novel.time));
    let sector = sector_of(az);
    let s = &tag.sectors[sector];
    Ok(ViewValidity {
        valid: s.valid,
        sector,
        count: s.observation_count,
    })
}
