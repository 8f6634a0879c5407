//! Novel-view camera poses at lateral, longitudinal and vertical offsets from a
//! training trajectory.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::{Translation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edit::right_of;
use crate::scene::{look_at, pose_at, CameraPose, PoseKey, RigidTransform, SceneError, WORLD_UP};

/// Travel speeds at or below this (m/s) leave lateral/longitudinal undefined.
pub const MIN_TRAVEL_SPEED: f64 = 1e-6;
const KEY_EPS: f64 = 1e-9;

pub const DEFAULT_LATERAL_BINS: [f64; 3] = [0.5, 1.6, 3.2];
pub const DEFAULT_LONGITUDINAL_BINS: [f64; 3] = [2.5, 5.0, 10.0];
pub const DEFAULT_VERTICAL_BINS: [f64; 3] = [0.1, 0.2, 0.3];
pub const THREE_BIN_LABELS: [&str; 3] = ["near", "medium", "far"];

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("trajectory needs at least 2 poses for {0} offsets")]
    TooFewPoses(Direction),
    #[error("travel direction undefined at t={t} (speed {speed:.3e} m/s)")]
    DirectionUndefined { t: f64, speed: f64 },
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Lateral,
    Longitudinal,
    Vertical,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Lateral, Direction::Longitudinal, Direction::Vertical];

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Lateral => "lateral",
            Direction::Longitudinal => "longitudinal",
            Direction::Vertical => "vertical",
        }
    }

    pub fn default_bins(&self) -> Vec<f64> {
        match self {
            Direction::Lateral => DEFAULT_LATERAL_BINS.to_vec(),
            Direction::Longitudinal => DEFAULT_LONGITUDINAL_BINS.to_vec(),
            Direction::Vertical => DEFAULT_VERTICAL_BINS.to_vec(),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSpec {
    pub direction: Direction,
    /// Signed meters. Lateral `+` is to the right of travel.
    #[serde(default)]
    pub magnitudes: Option<Vec<f64>>,
    /// Bin labels; defaults to near/medium/far for three bins, `b{i}` otherwise.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default = "yes")]
    pub keep_orientation: bool,
}

impl OffsetSpec {
    pub fn new(direction: Direction) -> Self {
        Self {
            direction,
            magnitudes: None,
            labels: None,
            keep_orientation: true,
        }
    }

    pub fn with_magnitudes(mut self, m: Vec<f64>) -> Self {
        self.magnitudes = Some(m);
        self
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.magnitudes.clone().unwrap_or_else(|| self.direction.default_bins())
    }

    pub fn labels(&self) -> Vec<String> {
        let n = self.magnitudes().len();
        match &self.labels {
            Some(l) => l.clone(),
            None if n == 3 => THREE_BIN_LABELS.iter().map(|s| s.to_string()).collect(),
            None => (0..n).map(|i| format!("b{i}")).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let m = self.magnitudes();
        if m.is_empty() {
            return Err(SamplerError::Invalid(format!("{} sweep has no bins", self.direction)));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SamplerError::Invalid("magnitudes must be finite".into()));
        }
        let labels = self.labels();
        if labels.len() != m.len() {
            return Err(SamplerError::Invalid(format!(
                "{} labels for {} magnitudes",
                labels.len(),
                m.len()
            )));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(SamplerError::Invalid("bin labels must be unique".into()));
        }
        Ok(())
    }
}

/// Sweep description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub offsets: Vec<OffsetSpec>,
    /// Sample times; defaults to the trajectory's own pose times.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            offsets: Direction::ALL.iter().map(|&d| OffsetSpec::new(d)).collect(),
            times: None,
        }
    }
}

impl SweepSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SamplerError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SceneError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| SamplerError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let mut dirs: Vec<Direction> = self.offsets.iter().map(|o| o.direction).collect();
        dirs.sort();
        dirs.dedup();
        if dirs.len() != self.offsets.len() {
            return Err(SamplerError::Invalid("each direction may appear once".into()));
        }
        self.offsets.iter().try_for_each(OffsetSpec::validate)
    }
}

/// One offset trajectory of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepBin {
    pub direction: Direction,
    pub label: String,
    pub magnitude: f64,
    pub poses: Vec<CameraPose>,
}

impl SweepBin {
    pub fn frame_id(&self, k: usize) -> String {
        frame_id(self.direction, &self.label, k)
    }
}

pub fn frame_id(direction: Direction, label: &str, k: usize) -> String {
    format!("{}-{label}-{k:05}", direction.as_str())
}

fn to_track(traj: &[CameraPose]) -> Vec<PoseKey> {
    traj.iter().map(|c| PoseKey::new(c.time, c.pose)).collect()
}

/// Travel direction at `t` by central difference of pose positions.
///
/// At a pose time the neighbours on both sides are used (one-sided at the ends);
/// between pose times the bracketing pair is used.
pub fn travel_direction(traj: &[CameraPose], t: f64) -> Result<Vector3<f64>, SamplerError> {
    let n = traj.len();
    let (a, b) = match traj.iter().position(|c| (c.time - t).abs() <= KEY_EPS) {
        Some(i) => (i.saturating_sub(1), (i + 1).min(n - 1)),
        None => {
            let hi = traj.partition_point(|c| c.time < t).clamp(1, n - 1);
            (hi - 1, hi)
        }
    };
    let dt = traj[b].time - traj[a].time;
    let dp = traj[b].position() - traj[a].position();
    let speed = if dt > 0.0 { dp.norm() / dt } else { 0.0 };
    if speed <= MIN_TRAVEL_SPEED {
        return Err(SamplerError::DirectionUndefined { t, speed });
    }
    Ok(dp / dp.norm())
}

/// Base pose at `t` displaced by `magnitude` meters along `direction`.
pub fn offset_pose(
    traj: &[CameraPose],
    t: f64,
    direction: Direction,
    magnitude: f64,
    keep_orientation: bool,
) -> Result<CameraPose, SamplerError> {
    if traj.is_empty() {
        return Err(SamplerError::Invalid("empty trajectory".into()));
    }
    if !magnitude.is_finite() {
        return Err(SamplerError::Invalid("magnitude must be finite".into()));
    }
    let base = pose_at(&to_track(traj), t);
    let needs_travel = direction != Direction::Vertical || !keep_orientation;
    if magnitude == 0.0 && keep_orientation {
        return Ok(CameraPose::new(t, base));
    }
    let travel = if needs_travel {
        if traj.len() < 2 {
            return Err(SamplerError::TooFewPoses(direction));
        }
        Some(travel_direction(traj, t)?)
    } else {
        None
    };
    let axis = match direction {
        Direction::Vertical => WORLD_UP,
        Direction::Longitudinal => travel.unwrap(),
        Direction::Lateral => right_of(&travel.unwrap())
            .ok_or(SamplerError::DirectionUndefined { t, speed: 0.0 })?,
    };
    let position = base.translation.vector + axis * magnitude;
    let pose = if keep_orientation {
        RigidTransform::from_parts(Translation3::from(position), base.rotation)
    } else {
        look_at(position, position + travel.unwrap())
    };
    Ok(CameraPose::new(t, pose))
}

/// One offset trajectory per (direction, magnitude).
pub fn sample_sweep(traj: &[CameraPose], spec: &SweepSpec) -> Result<Vec<SweepBin>, SamplerError> {
    spec.validate()?;
    let times: Vec<f64> = match &spec.times {
        Some(t) => t.clone(),
        None => traj.iter().map(|c| c.time).collect(),
    };
    let mut bins = Vec::new();
    for off in &spec.offsets {
        for (magnitude, label) in off.magnitudes().into_iter().zip(off.labels()) {
            let poses = times
                .iter()
                .map(|&t| offset_pose(traj, t, off.direction, magnitude, off.keep_orientation))
                .collect::<Result<Vec<_>, _>>()?;
            bins.push(SweepBin {
                direction: off.direction,
                label,
                magnitude,
                poses,
            });
        }
    }
    Ok(bins)
}
