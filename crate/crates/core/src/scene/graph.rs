use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::gaussians::GaussianSet;
use super::pose::{is_strictly_increasing, pose_at, PoseKey, RigidTransform};
use super::SceneError;
use crate::coverage::CoverageTag;

/// Tolerance on pose key times against the scene time span.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Background,
    Vehicle,
    Pedestrian,
    Other,
}

impl NodeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeClass::Background => "background",
            NodeClass::Vehicle => "vehicle",
            NodeClass::Pedestrian => "pedestrian",
            NodeClass::Other => "other",
        }
    }
}

/// A group of Gaussians moving rigidly along a pose track.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneNode {
    pub id: String,
    pub class: NodeClass,
    /// Sorted, unique indices into the scene's [`GaussianSet`].
    pub indices: Vec<u32>,
    /// world←node poses with strictly increasing times.
    pub pose_track: Vec<PoseKey>,
    /// Unit "forward" direction in the node frame.
    pub heading: Vector3<f64>,
    pub coverage: Option<CoverageTag>,
}

impl SceneNode {
    pub fn new(id: impl Into<String>, class: NodeClass, indices: Vec<u32>) -> Self {
        Self {
            id: id.into(),
            class,
            indices,
            pose_track: vec![PoseKey::identity(0.0)],
            heading: Vector3::x(),
            coverage: None,
        }
    }

    pub fn background(indices: Vec<u32>, t_start: f64) -> Self {
        Self {
            pose_track: vec![PoseKey::identity(t_start)],
            ..Self::new(BACKGROUND_ID, NodeClass::Background, indices)
        }
    }

    pub fn with_track(mut self, track: Vec<PoseKey>) -> Self {
        self.pose_track = track;
        self
    }

    pub fn is_background(&self) -> bool {
        self.class == NodeClass::Background
    }

    /// Pose at `t`; linear in translation, slerp in rotation, clamped at the ends.
    pub fn pose_at(&self, t: f64) -> RigidTransform {
        pose_at(&self.pose_track, t)
    }

    /// Rigid nodes of class pedestrian carry a fidelity caveat in reports.
    pub fn has_rigidity_caveat(&self) -> bool {
        self.class == NodeClass::Pedestrian
    }
}

/// Id given to the implicit background node.
pub const BACKGROUND_ID: &str = "background";

/// A Gaussian set partitioned into nodes with pose tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub gaussians: GaussianSet,
    pub nodes: Vec<SceneNode>,
    pub frame_rate: f64,
    pub time_span: [f64; 2],
}

impl SceneGraph {
    /// Scene with every Gaussian owned by a single background node.
    pub fn static_scene(gaussians: GaussianSet, frame_rate: f64, time_span: [f64; 2]) -> Self {
        let all = (0..gaussians.len() as u32).collect();
        Self {
            gaussians,
            nodes: vec![SceneNode::background(all, time_span[0])],
            frame_rate,
            time_span,
        }
    }

    pub fn node(&self, id: &str) -> Option<&SceneNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn background_index(&self) -> Option<usize> {
        self.nodes.iter().position(SceneNode::is_background)
    }

    pub fn clamp_time(&self, t: f64) -> f64 {
        t.clamp(self.time_span[0], self.time_span[1])
    }

    /// Full validation: Gaussian data, partition, pose tracks, time span.
    pub fn validate(&self) -> Result<(), SceneError> {
        self.gaussians.validate()?;
        let [t0, t1] = self.time_span;
        if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
            return Err(SceneError::Validation(format!(
                "invalid time span [{t0}, {t1}]"
            )));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(SceneError::Validation(format!(
                "frame rate must be positive, got {}",
                self.frame_rate
            )));
        }
        let n = self.gaussians.len();
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut seen_background = false;
        for (ni, node) in self.nodes.iter().enumerate() {
            if self.nodes[..ni].iter().any(|o| o.id == node.id) {
                return Err(SceneError::Validation(format!("duplicate node id {}", node.id)));
            }
            if node.is_background() {
                if seen_background {
                    return Err(SceneError::Validation("more than one background node".into()));
                }
                seen_background = true;
                let identity = node.pose_track.len() == 1
                    && node.pose_track[0].pose == RigidTransform::identity();
                if !identity {
                    return Err(SceneError::Validation(
                        "background node must have a single identity pose".into(),
                    ));
                }
            }
            if node.pose_track.is_empty() {
                return Err(SceneError::Validation(format!(
                    "node {} has an empty pose track",
                    node.id
                )));
            }
            if !is_strictly_increasing(&node.pose_track) {
                return Err(SceneError::NonMonotoneTimes {
                    node: node.id.clone(),
                });
            }
            for key in &node.pose_track {
                if key.time < t0 - TIME_EPS || key.time > t1 + TIME_EPS {
                    return Err(SceneError::Validation(format!(
                        "node {} has a pose key at t={} outside [{t0}, {t1}]",
                        node.id, key.time
                    )));
                }
                let qn = key.pose.rotation.quaternion().norm();
                if (qn - 1.0).abs() > 1e-9 || !key.pose.translation.vector.iter().all(|v| v.is_finite()) {
                    return Err(SceneError::Validation(format!(
                        "node {} has a non-rigid pose at t={}",
                        node.id, key.time
                    )));
                }
            }
            let h = node.heading.norm();
            if !((h - 1.0).abs() < 1e-6) {
                return Err(SceneError::Validation(format!(
                    "node {} heading is not a unit vector",
                    node.id
                )));
            }
            if node.indices.windows(2).any(|w| w[1] <= w[0]) {
                return Err(SceneError::Validation(format!(
                    "node {} indices are not sorted and unique",
                    node.id
                )));
            }
            for &i in &node.indices {
                let i = i as usize;
                if i >= n {
                    return Err(SceneError::IndexRange {
                        node: node.id.clone(),
                        index: i,
                        count: n,
                    });
                }
                if let Some(prev) = owner[i] {
                    return Err(SceneError::Overlap {
                        first: self.nodes[prev].id.clone(),
                        second: node.id.clone(),
                        index: i,
                    });
                }
                owner[i] = Some(ni);
            }
        }
        if let Some(missing) = owner.iter().position(Option::is_none) {
            return Err(SceneError::Validation(format!(
                "gaussian {missing} is not owned by any node"
            )));
        }
        Ok(())
    }

    /// Per-Gaussian owning node index. Assumes a validated scene.
    pub fn owners(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.gaussians.len()];
        for (ni, node) in self.nodes.iter().enumerate() {
            for &i in &node.indices {
                owner[i as usize] = ni;
            }
        }
        owner
    }
}

/// Compresses sorted indices into half-open `[lo, hi)` ranges.
pub fn index_ranges(indices: &[u32]) -> Vec<[u32; 2]> {
    let mut ranges: Vec<[u32; 2]> = Vec::new();
    for &i in indices {
        match ranges.last_mut() {
            Some(r) if r[1] == i => r[1] = i + 1,
            _ => ranges.push([i, i + 1]),
        }
    }
    ranges
}
