use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::SceneError;

/// Number of higher-order SH coefficients per Gaussian (degrees 1..=3, 15 per channel).
pub const SH_REST_LEN: usize = 45;
/// Higher-order SH coefficients per color channel.
pub const SH_REST_PER_CHANNEL: usize = 15;

/// Quaternions whose norm deviates from one by more than this are renormalized on load.
pub const QUATERNION_NORM_TOLERANCE: f32 = 1e-6;

/// One Gaussian primitive in raw (pre-activation) parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub position: [f32; 3],
    /// Unit quaternion (w, x, y, z).
    pub rotation: [f32; 4],
    pub log_scale: [f32; 3],
    pub logit_opacity: f32,
    pub sh_dc: [f32; 3],
    /// Channel-major: coefficient `k` of channel `c` is at `c * 15 + k`.
    pub sh_rest: [f32; SH_REST_LEN],
}

impl Gaussian {
    pub fn opacity(&self) -> f64 {
        sigmoid(self.logit_opacity as f64)
    }

    pub fn scale(&self) -> Vector3<f64> {
        Vector3::new(
            (self.log_scale[0] as f64).exp(),
            (self.log_scale[1] as f64).exp(),
            (self.log_scale[2] as f64).exp(),
        )
    }

    pub fn unit_rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation.map(|v| v as f64);
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
    }

    /// Covariance `R diag(s)^2 R^T` in the Gaussian's parent frame.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.unit_rotation().to_rotation_matrix().into_inner();
        let s = self.scale();
        let m = r * Matrix3::from_diagonal(&s);
        m * m.transpose()
    }

    fn values(&self) -> impl Iterator<Item = (&'static str, f32)> + '_ {
        let names = ["position", "rotation", "log_scale", "opacity", "sh_dc", "sh_rest"];
        let groups: [&[f32]; 6] = [
            &self.position,
            &self.rotation,
            &self.log_scale,
            std::slice::from_ref(&self.logit_opacity),
            &self.sh_dc,
            &self.sh_rest,
        ];
        names
            .into_iter()
            .zip(groups)
            .flat_map(|(n, g)| g.iter().map(move |v| (n, *v)))
    }
}

impl Default for Gaussian {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [0.0; 3],
            logit_opacity: 0.0,
            sh_dc: [0.0; 3],
            sh_rest: [0.0; SH_REST_LEN],
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Columnar store of Gaussian primitives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianSet {
    pub position: Vec<[f32; 3]>,
    pub rotation: Vec<[f32; 4]>,
    pub log_scale: Vec<[f32; 3]>,
    pub logit_opacity: Vec<f32>,
    pub sh_dc: Vec<[f32; 3]>,
    pub sh_rest: Vec<[f32; SH_REST_LEN]>,
}

impl GaussianSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            position: Vec::with_capacity(n),
            rotation: Vec::with_capacity(n),
            log_scale: Vec::with_capacity(n),
            logit_opacity: Vec::with_capacity(n),
            sh_dc: Vec::with_capacity(n),
            sh_rest: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn push(&mut self, g: Gaussian) {
        self.position.push(g.position);
        self.rotation.push(g.rotation);
        self.log_scale.push(g.log_scale);
        self.logit_opacity.push(g.logit_opacity);
        self.sh_dc.push(g.sh_dc);
        self.sh_rest.push(g.sh_rest);
    }

    pub fn get(&self, i: usize) -> Gaussian {
        Gaussian {
            position: self.position[i],
            rotation: self.rotation[i],
            log_scale: self.log_scale[i],
            logit_opacity: self.logit_opacity[i],
            sh_dc: self.sh_dc[i],
            sh_rest: self.sh_rest[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Gaussian> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// New set holding the given indices, in the order given.
    pub fn select(&self, indices: &[u32]) -> GaussianSet {
        let mut out = GaussianSet::with_capacity(indices.len());
        for &i in indices {
            out.push(self.get(i as usize));
        }
        out
    }

    pub fn extend_from(&mut self, other: &GaussianSet) {
        self.position.extend_from_slice(&other.position);
        self.rotation.extend_from_slice(&other.rotation);
        self.log_scale.extend_from_slice(&other.log_scale);
        self.logit_opacity.extend_from_slice(&other.logit_opacity);
        self.sh_dc.extend_from_slice(&other.sh_dc);
        self.sh_rest.extend_from_slice(&other.sh_rest);
    }

    /// Renormalizes quaternions that drifted from unit norm.
    ///
    /// Unit quaternions (within [`QUATERNION_NORM_TOLERANCE`]) are left
    /// untouched so their bits survive a save/load cycle.
    pub fn normalize_rotations(&mut self) -> Result<(), SceneError> {
        for (i, q) in self.rotation.iter_mut().enumerate() {
            let norm = q.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(SceneError::Data {
                    index: i,
                    what: "zero-norm rotation quaternion".into(),
                });
            }
            if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE as f64 {
                *q = q.map(|v| ((v as f64) / norm) as f32);
            }
        }
        Ok(())
    }

    /// Checks finiteness of every value and unit norm of rotations.
    pub fn validate(&self) -> Result<(), SceneError> {
        let n = self.len();
        let lens = [
            self.rotation.len(),
            self.log_scale.len(),
            self.logit_opacity.len(),
            self.sh_dc.len(),
            self.sh_rest.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(SceneError::Validation(
                "gaussian columns have inconsistent lengths".into(),
            ));
        }
        for (i, g) in self.iter().enumerate() {
            if let Some((name, _)) = g.values().find(|(_, v)| !v.is_finite()) {
                return Err(SceneError::Data {
                    index: i,
                    what: format!("non-finite {name}"),
                });
            }
            let raw = g.rotation.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
            if (raw - 1.0).abs() > 2.0 * QUATERNION_NORM_TOLERANCE as f64 {
                return Err(SceneError::Data {
                    index: i,
                    what: format!("rotation norm {raw} is not unit"),
                });
            }
        }
        Ok(())
    }
}
