//! Rigid transforms and timed pose tracks.

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid transform mapping a child frame into its parent (e.g. world←node).
pub type RigidTransform = Isometry3<f64>;

/// World up axis. Worlds are z-up, right handed.
pub const WORLD_UP: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// A pose sample at a point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseKey {
    pub time: f64,
    pub pose: RigidTransform,
}

impl PoseKey {
    pub fn new(time: f64, pose: RigidTransform) -> Self {
        Self { time, pose }
    }

    pub fn identity(time: f64) -> Self {
        Self::new(time, RigidTransform::identity())
    }
}

/// On-disk form of a pose key: `{t, translation[3], quaternion[w,x,y,z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseKeyDoc {
    pub t: f64,
    pub translation: [f64; 3],
    pub quaternion: [f64; 4],
}

impl From<&PoseKey> for PoseKeyDoc {
    fn from(key: &PoseKey) -> Self {
        let (translation, quaternion) = split_transform(&key.pose);
        Self {
            t: key.time,
            translation,
            quaternion,
        }
    }
}

/// Maximum deviation from unit norm tolerated in quaternions read from text documents.
pub const QUATERNION_TEXT_TOLERANCE: f64 = 1e-3;

impl PoseKeyDoc {
    /// Converts into a [`PoseKey`], renormalizing the quaternion.
    ///
    /// Returns `None` if any value is non-finite or the quaternion norm is
    /// further than [`QUATERNION_TEXT_TOLERANCE`] from one.
    pub fn to_key(&self) -> Option<PoseKey> {
        let pose = make_transform(self.translation, self.quaternion)?;
        self.t.is_finite().then_some(PoseKey::new(self.t, pose))
    }
}

/// Quaternions this close to unit norm are used as given.
const UNIT_NORM_SLACK: f64 = 1e-12;

/// Builds a transform from a translation and a (w,x,y,z) quaternion.
pub fn make_transform(translation: [f64; 3], quaternion: [f64; 4]) -> Option<RigidTransform> {
    if translation.iter().chain(quaternion.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    let [w, x, y, z] = quaternion;
    let q = Quaternion::new(w, x, y, z);
    if (q.norm() - 1.0).abs() > QUATERNION_TEXT_TOLERANCE {
        return None;
    }
    // already-unit quaternions are kept bit-for-bit so text round trips are exact
    let rotation = if (q.norm() - 1.0).abs() <= UNIT_NORM_SLACK {
        UnitQuaternion::new_unchecked(q)
    } else {
        UnitQuaternion::from_quaternion(q)
    };
    Some(RigidTransform::from_parts(
        Translation3::new(translation[0], translation[1], translation[2]),
        rotation,
    ))
}

/// Splits a transform into translation and (w,x,y,z) quaternion arrays.
pub fn split_transform(pose: &RigidTransform) -> ([f64; 3], [f64; 4]) {
    let t = pose.translation.vector;
    let q = pose.rotation.quaternion();
    ([t.x, t.y, t.z], [q.w, q.i, q.j, q.k])
}

/// Rotation of `angle` radians about world up.
pub fn yaw_rotation(angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle)
}

/// Spherical linear interpolation along the shorter arc.
///
/// Falls back to normalized linear interpolation when the inputs are nearly
/// parallel, where the sine denominator loses precision.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, u: f64) -> UnitQuaternion<f64> {
    let qa = a.quaternion();
    let mut qb = *b.quaternion();
    let mut dot = qa.dot(&qb);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    if dot > 0.9995 {
        let q = qa * (1.0 - u) + qb * u;
        return UnitQuaternion::from_quaternion(q);
    }
    let theta = dot.clamp(-1.0, 1.0).acos();
    let sin_theta = theta.sin();
    let wa = ((1.0 - u) * theta).sin() / sin_theta;
    let wb = (u * theta).sin() / sin_theta;
    UnitQuaternion::from_quaternion(qa * wa + qb * wb)
}

/// Interpolates between two rigid transforms: linear in translation,
/// spherical-linear in rotation.
pub fn interpolate_transform(a: &RigidTransform, b: &RigidTransform, u: f64) -> RigidTransform {
    let ta = a.translation.vector;
    let tb = b.translation.vector;
    let t = ta + (tb - ta) * u;
    RigidTransform::from_parts(Translation3::from(t), slerp(&a.rotation, &b.rotation, u))
}

/// Evaluates a pose track at time `t`.
///
/// Keys must be sorted by strictly increasing time. Times outside the track
/// clamp to the end keys. Panics on an empty track.
pub fn pose_at(track: &[PoseKey], t: f64) -> RigidTransform {
    assert!(!track.is_empty(), "pose track must be non-empty");
    let first = &track[0];
    let last = &track[track.len() - 1];
    if t <= first.time || track.len() == 1 {
        return first.pose;
    }
    if t >= last.time {
        return last.pose;
    }
    // index of the first key strictly after t
    let hi = track.partition_point(|k| k.time <= t);
    let a = &track[hi - 1];
    let b = &track[hi];
    if t == a.time {
        return a.pose;
    }
    let u = (t - a.time) / (b.time - a.time);
    interpolate_transform(&a.pose, &b.pose, u)
}

/// True when key times are strictly increasing.
pub fn is_strictly_increasing(track: &[PoseKey]) -> bool {
    track.windows(2).all(|w| w[1].time > w[0].time)
}
