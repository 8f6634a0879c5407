use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::pose::{PoseKeyDoc, RigidTransform};
use super::SceneError;

/// Pinhole intrinsics. Pixel `(i, j)` has its center at coordinates `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub near_plane: f64,
}

/// Near plane used by [`CameraModel::centered`], meters.
pub const DEFAULT_NEAR_PLANE: f64 = 0.2;

impl CameraModel {
    /// Camera with the principal point at the image center and equal focal lengths.
    pub fn centered(width: u32, height: u32, focal: f64) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            near_plane: DEFAULT_NEAR_PLANE,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64
            && self.near_plane > 0.0
            && [self.fx, self.fy, self.cx, self.cy, self.near_plane]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SceneError::Validation(format!("invalid camera model {self:?}")))
        }
    }

    /// Projects a camera-frame point to pixel coordinates.
    pub fn project(&self, p: &Vector3<f64>) -> [f64; 2] {
        [
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ]
    }
}

/// A timed camera pose, world←camera. The camera looks along +z, +x right, +y down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub time: f64,
    pub pose: RigidTransform,
}

impl CameraPose {
    pub fn new(time: f64, pose: RigidTransform) -> Self {
        Self { time, pose }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.pose.translation.vector
    }

    pub fn world_to_camera(&self) -> RigidTransform {
        self.pose.inverse()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryDoc {
    pub poses: Vec<PoseKeyDoc>,
}

impl TrajectoryDoc {
    pub fn from_poses(poses: &[CameraPose]) -> Self {
        Self {
            poses: poses
                .iter()
                .map(|p| PoseKeyDoc::from(&super::PoseKey::new(p.time, p.pose)))
                .collect(),
        }
    }

    pub fn to_poses(&self) -> Result<Vec<CameraPose>, SceneError> {
        let poses = self
            .poses
            .iter()
            .enumerate()
            .map(|(i, d)| {
                d.to_key()
                    .map(|k| CameraPose::new(k.time, k.pose))
                    .ok_or_else(|| SceneError::Validation(format!("invalid trajectory pose {i}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if poses.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(SceneError::Validation(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        Ok(poses)
    }
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<CameraPose>, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SceneError::io(path, e))?;
    let doc: TrajectoryDoc = serde_json::from_str(&text)?;
    doc.to_poses()
}

pub fn save_trajectory(poses: &[CameraPose], path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&TrajectoryDoc::from_poses(poses))?;
    fs::write(path, text + "\n").map_err(|e| SceneError::io(path, e))
}

/// Rotation for a camera at `eye` looking at `target`, with image-down
/// aligned to world down as far as possible.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> RigidTransform {
    use nalgebra::{Matrix3, Rotation3, Translation3, UnitQuaternion};
    let forward = (target - eye).normalize();
    let mut down = -super::pose::WORLD_UP;
    if forward.cross(&down).norm() < 1e-9 {
        down = Vector3::x();
    }
    let right = down.cross(&forward).normalize();
    let down = forward.cross(&right);
    let m = Matrix3::from_columns(&[right, down, forward]);
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    RigidTransform::from_parts(Translation3::from(eye), rot)
}
