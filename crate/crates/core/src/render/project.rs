//! Perspective projection of 3D Gaussians to screen-space footprints.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector3};
use thiserror::Error;

use crate::scene::{CameraModel, CameraPose, RigidTransform};

/// Low-pass dilation added to the screen-space covariance diagonal, in pixels².
pub const COVARIANCE_DILATION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Pixel coordinates of the projected mean.
    pub mean: [f64; 2],
    /// Dilated screen-space covariance.
    pub cov: Matrix2<f64>,
    /// Camera-frame depth of the mean.
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("gaussian mean at depth {depth} is in front of the near plane")]
pub struct BehindNearPlane {
    pub depth: f64,
}

pub fn project_gaussian(
    mean: &Vector3<f64>,
    cov3d: &Matrix3<f64>,
    cam: &CameraModel,
    pose: &CameraPose,
) -> Result<Projection, BehindNearPlane> {
    project_in_view(mean, cov3d, cam, &pose.world_to_camera())
}

/// Same as [`project_gaussian`] with a precomputed world→camera transform.
pub fn project_in_view(
    mean: &Vector3<f64>,
    cov3d: &Matrix3<f64>,
    cam: &CameraModel,
    view: &RigidTransform,
) -> Result<Projection, BehindNearPlane> {
    let p = view.transform_point(&(*mean).into()).coords;
    if !(p.z >= cam.near_plane) {
        return Err(BehindNearPlane { depth: p.z });
    }
    let w = view.rotation.to_rotation_matrix().into_inner();
    let cov = screen_covariance(&p, &w, cov3d, cam) + Matrix2::identity() * COVARIANCE_DILATION;
    Ok(Projection {
        mean: cam.project(&p),
        cov,
        depth: p.z,
    })
}

/// `J W Σ Wᵀ Jᵀ` without dilation; `p` is the camera-frame mean.
pub fn screen_covariance(
    p: &Vector3<f64>,
    world_to_camera: &Matrix3<f64>,
    cov3d: &Matrix3<f64>,
    cam: &CameraModel,
) -> Matrix2<f64> {
    let jac = projection_jacobian(p, cam);
    let t = jac * world_to_camera;
    t * cov3d * t.transpose()
}

/// The Jacobian is evaluated with `x/z` and `y/z` clamped to this multiple of
/// the half field-of-view tangent, as in the reference splatting rasterizer.
pub const JACOBIAN_FOV_GUARD: f64 = 1.3;

/// Jacobian of the pinhole projection at camera-frame point `p`, with the
/// off-axis terms evaluated at the guard-band-clamped direction.
pub fn projection_jacobian(p: &Vector3<f64>, cam: &CameraModel) -> Matrix2x3<f64> {
    let lim_x = JACOBIAN_FOV_GUARD * cam.width as f64 / (2.0 * cam.fx);
    let lim_y = JACOBIAN_FOV_GUARD * cam.height as f64 / (2.0 * cam.fy);
    let inv_z = 1.0 / p.z;
    let tx = (p.x * inv_z).clamp(-lim_x, lim_x);
    let ty = (p.y * inv_z).clamp(-lim_y, lim_y);
    Matrix2x3::new(
        cam.fx * inv_z,
        0.0,
        -cam.fx * tx * inv_z,
        0.0,
        cam.fy * inv_z,
        -cam.fy * ty * inv_z,
    )
}
