//! Generated pose tracks: straight interpolation, S-curve, lane change, keyframes.

use nalgebra::{Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::EditError;
use crate::scene::{
    is_strictly_increasing, pose_at, yaw_rotation, PoseKey, PoseKeyDoc, RigidTransform, SceneNode,
    WORLD_UP,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectorySpec {
    /// Constant-velocity motion from `p0` at `t0` to `p1` at `t1`, facing the motion direction.
    StraightInterpolation {
        p0: [f64; 3],
        p1: [f64; 3],
        t0: f64,
        t1: f64,
    },
    /// Weave around the base track: lateral offset `amplitude * sin(2π s(u))`,
    /// where `s` is the smoothstep ramp over `[t0, t1]`.
    SCurve { amplitude: f64, t0: f64, t1: f64 },
    /// Lateral shift of `shift * s(u)` over `[t0, t1]`, held afterwards.
    LaneChange { shift: f64, t0: f64, t1: f64 },
    Keyframes { keys: Vec<PoseKeyDoc> },
}

/// `s(u) = 3u² − 2u³` on [0, 1], clamped outside.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), EditError> {
        let check_window = |t0: f64, t1: f64| {
            if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
                return Err(EditError::Validation(format!(
                    "trajectory window [{t0}, {t1}] must satisfy t1 > t0"
                )));
            }
            Ok(())
        };
        match self {
            TrajectorySpec::StraightInterpolation { p0, p1, t0, t1 } => {
                check_window(*t0, *t1)?;
                if p0.iter().chain(p1).any(|v| !v.is_finite()) {
                    return Err(EditError::Validation("non-finite endpoint".into()));
                }
            }
            TrajectorySpec::SCurve { amplitude: d, t0, t1 }
            | TrajectorySpec::LaneChange { shift: d, t0, t1 } => {
                check_window(*t0, *t1)?;
                if !d.is_finite() {
                    return Err(EditError::Validation("lateral offset must be finite".into()));
                }
            }
            TrajectorySpec::Keyframes { keys } => {
                if keys.is_empty() {
                    return Err(EditError::Validation("keyframes need at least one key".into()));
                }
            }
        }
        Ok(())
    }

    /// Generates the pose track for `node`, sampled at `frame_rate` within `span`.
    pub fn generate(
        &self,
        node: &SceneNode,
        frame_rate: f64,
        span: [f64; 2],
    ) -> Result<Vec<PoseKey>, EditError> {
        self.validate()?;
        let track = match self {
            TrajectorySpec::StraightInterpolation { p0, p1, t0, t1 } => {
                let (p0, p1) = (Vector3::from(*p0), Vector3::from(*p1));
                let rot = facing(&node.heading, &(p1 - p0))
                    .unwrap_or_else(|| node.pose_at(*t0).rotation);
                sample_times(*t0, *t1, frame_rate)
                    .into_iter()
                    .map(|t| {
                        let p = p0 + (p1 - p0) * ((t - t0) / (t1 - t0));
                        PoseKey::new(t, RigidTransform::from_parts(Translation3::from(p), rot))
                    })
                    .collect()
            }
            TrajectorySpec::SCurve { amplitude, t0, t1 } => {
                let (a, t0, t1) = (*amplitude, *t0, *t1);
                lateral_track(node, frame_rate, span, t0, t1, |u| {
                    a * (2.0 * std::f64::consts::PI * smoothstep(u)).sin()
                })
            }
            TrajectorySpec::LaneChange { shift, t0, t1 } => {
                let (d, t0, t1) = (*shift, *t0, *t1);
                lateral_track(node, frame_rate, span, t0, t1, |u| d * smoothstep(u))
            }
            TrajectorySpec::Keyframes { keys } => keys
                .iter()
                .map(|k| {
                    k.to_key()
                        .ok_or_else(|| EditError::Validation(format!("invalid keyframe at t={}", k.t)))
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        if !is_strictly_increasing(&track) {
            return Err(EditError::Validation(
                "generated track times are not strictly increasing".into(),
            ));
        }
        Ok(track)
    }
}

/// Sample times `t0, t0 + 1/rate, ...`, always ending exactly at `t1`.
pub fn sample_times(t0: f64, t1: f64, rate: f64) -> Vec<f64> {
    let steps = ((t1 - t0) * rate + 1e-9).floor().max(0.0) as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| t0 + k as f64 / rate).collect();
    if t1 - times[times.len() - 1] > 1e-9 {
        times.push(t1);
    } else {
        *times.last_mut().unwrap() = t1;
    }
    times
}

/// Yaw about world up turning the node heading onto `direction` (ground plane).
fn facing(heading: &Vector3<f64>, direction: &Vector3<f64>) -> Option<UnitQuaternion<f64>> {
    let d = Vector3::new(direction.x, direction.y, 0.0);
    let h = Vector3::new(heading.x, heading.y, 0.0);
    if d.norm() < 1e-9 || h.norm() < 1e-9 {
        return None;
    }
    Some(yaw_rotation(d.y.atan2(d.x) - h.y.atan2(h.x)))
}

/// Ground-plane unit vector to the right of `direction`.
pub fn right_of(direction: &Vector3<f64>) -> Option<Vector3<f64>> {
    let r = direction.cross(&WORLD_UP);
    let r = Vector3::new(r.x, r.y, 0.0);
    (r.norm() > 1e-12).then(|| r.normalize())
}

fn lateral_track(
    node: &SceneNode,
    frame_rate: f64,
    span: [f64; 2],
    t0: f64,
    t1: f64,
    offset: impl Fn(f64) -> f64,
) -> Vec<PoseKey> {
    let base = &node.pose_track;
    let start = base[0].time.min(t0).max(span[0]);
    let end = base[base.len() - 1].time.max(t1).min(span[1]);
    let h = 0.5 / frame_rate;
    let times = sample_times(start, end.max(start), frame_rate);
    let positions: Vec<(f64, RigidTransform, Vector3<f64>)> = times
        .iter()
        .map(|&t| {
            let pose = pose_at(base, t);
            let travel = pose_at(base, t + h).translation.vector - pose_at(base, t - h).translation.vector;
            let dir = if travel.norm() > 1e-9 {
                travel
            } else {
                pose.rotation * node.heading
            };
            let right = right_of(&dir).unwrap_or_else(Vector3::zeros);
            let u = (t - t0) / (t1 - t0);
            let p = pose.translation.vector + right * offset(u);
            (t, pose, p)
        })
        .collect();
    (0..positions.len())
        .map(|i| {
            let (t, base_pose, p) = positions[i];
            let prev = positions[i.saturating_sub(1)].2;
            let next = positions[(i + 1).min(positions.len() - 1)].2;
            let rot = facing(&node.heading, &(next - prev)).unwrap_or(base_pose.rotation);
            PoseKey::new(t, RigidTransform::from_parts(Translation3::from(p), rot))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::NodeClass;

    fn straight_node() -> SceneNode {
        SceneNode::new("car", NodeClass::Vehicle, vec![]).with_track(vec![
            PoseKey::new(0.0, RigidTransform::translation(0.0, 0.0, 0.0)),
            PoseKey::new(1.0, RigidTransform::translation(10.0, 0.0, 0.0)),
        ])
    }

    #[test]
    fn smoothstep_values() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(2.0), 1.0);
    }

    #[test]
    fn straight_eleven_keys() {
        let spec = TrajectorySpec::StraightInterpolation {
            p0: [0.0; 3],
            p1: [10.0, 0.0, 0.0],
            t0: 0.0,
            t1: 1.0,
        };
        let track = spec.generate(&straight_node(), 10.0, [0.0, 1.0]).unwrap();
        assert_eq!(track.len(), 11);
        assert_eq!(track[5].time, 0.5);
        assert!((track[5].pose.translation.vector - Vector3::new(5.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(track[10].time, 1.0);
        // heading +x already matches the motion
        assert!(track[0].pose.rotation.angle() < 1e-12);
    }

    #[test]
    fn straight_faces_motion() {
        let spec = TrajectorySpec::StraightInterpolation {
            p0: [0.0; 3],
            p1: [0.0, 5.0, 0.0],
            t0: 0.0,
            t1: 1.0,
        };
        let track = spec.generate(&straight_node(), 4.0, [0.0, 1.0]).unwrap();
        let fwd = track[1].pose.rotation * Vector3::x();
        assert!((fwd - Vector3::y()).norm() < 1e-12);
    }

    #[test]
    fn lane_change_midpoint() {
        let spec = TrajectorySpec::LaneChange {
            shift: 3.2,
            t0: 0.0,
            t1: 1.0,
        };
        let node = straight_node();
        let track = spec.generate(&node, 10.0, [0.0, 1.0]).unwrap();
        let mid = track.iter().find(|k| k.time == 0.5).unwrap();
        let base = node.pose_at(0.5).translation.vector;
        let off = mid.pose.translation.vector - base;
        assert!((off.norm() - 1.6).abs() < 1e-9);
        // right of +x travel is -y
        assert!((off - Vector3::new(0.0, -1.6, 0.0)).norm() < 1e-9);
        let end = track.last().unwrap().pose.translation.vector;
        assert!((end.y + 3.2).abs() < 1e-9);
    }

    #[test]
    fn s_curve_returns_to_base() {
        let spec = TrajectorySpec::SCurve {
            amplitude: 1.0,
            t0: 0.0,
            t1: 1.0,
        };
        let track = spec.generate(&straight_node(), 20.0, [0.0, 1.0]).unwrap();
        assert!(track[0].pose.translation.vector.y.abs() < 1e-12);
        assert!(track.last().unwrap().pose.translation.vector.y.abs() < 1e-9);
        let max = track.iter().map(|k| k.pose.translation.vector.y.abs()).fold(0.0, f64::max);
        assert!(max > 0.9 && max <= 1.0 + 1e-12);
    }

    #[test]
    fn single_keyframe_is_constant() {
        let key = PoseKeyDoc {
            t: 0.3,
            translation: [1.0, 2.0, 3.0],
            quaternion: [1.0, 0.0, 0.0, 0.0],
        };
        let spec = TrajectorySpec::Keyframes { keys: vec![key] };
        let track = spec.generate(&straight_node(), 10.0, [0.0, 1.0]).unwrap();
        for t in [0.0, 0.3, 0.9, 5.0] {
            assert_eq!(pose_at(&track, t).translation.vector, Vector3::new(1.0, 2.0, 3.0));
        }
    }

    #[test]
    fn invalid_window_rejected() {
        let spec = TrajectorySpec::LaneChange {
            shift: 1.0,
            t0: 1.0,
            t1: 1.0,
        };
        assert!(matches!(spec.validate(), Err(EditError::Validation(_))));
        let spec = TrajectorySpec::SCurve {
            amplitude: f64::NAN,
            t0: 0.0,
            t1: 1.0,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sample_times_cover_window() {
        assert_eq!(sample_times(0.0, 1.0, 10.0).len(), 11);
        let t = sample_times(0.0, 1.05, 10.0);
        assert_eq!(t.len(), 12);
        assert_eq!(*t.last().unwrap(), 1.05);
        assert_eq!(sample_times(2.0, 2.0, 10.0), vec![2.0]);
    }
}
