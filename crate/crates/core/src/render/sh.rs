//! Real spherical-harmonics color evaluation, degrees 0 through 3.

use nalgebra::Vector3;

use crate::scene::{SH_REST_LEN, SH_REST_PER_CHANNEL};

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// The 15 higher-order basis values for a unit direction.
pub fn sh_basis_rest(dir: &Vector3<f64>) -> [f64; SH_REST_PER_CHANNEL] {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    [
        -SH_C1 * y,
        SH_C1 * z,
        -SH_C1 * x,
        SH_C2[0] * xy,
        SH_C2[1] * yz,
        SH_C2[2] * (2.0 * zz - xx - yy),
        SH_C2[3] * xz,
        SH_C2[4] * (xx - yy),
        SH_C3[0] * y * (3.0 * xx - yy),
        SH_C3[1] * xy * z,
        SH_C3[2] * y * (4.0 * zz - xx - yy),
        SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        SH_C3[4] * x * (4.0 * zz - xx - yy),
        SH_C3[5] * z * (xx - yy),
        SH_C3[6] * x * (xx - 3.0 * yy),
    ]
}

/// View-dependent color, `clamp(0.5 + C0*dc + sum(basis * rest), 0, 1)`.
///
/// `sh_rest` is channel-major (15 coefficients per channel); `view_dir` is
/// the unit direction from the camera toward the Gaussian.
pub fn eval_sh_color(
    sh_dc: &[f32; 3],
    sh_rest: &[f32; SH_REST_LEN],
    view_dir: &Vector3<f64>,
) -> [f64; 3] {
    let basis = sh_basis_rest(view_dir);
    std::array::from_fn(|c| {
        let rest = &sh_rest[c * SH_REST_PER_CHANNEL..(c + 1) * SH_REST_PER_CHANNEL];
        let higher: f64 = basis.iter().zip(rest).map(|(b, &k)| b * k as f64).sum();
        (0.5 + SH_C0 * sh_dc[c] as f64 + higher).clamp(0.0, 1.0)
    })
}

/// Degree-0 coefficient that reproduces `rgb` for any view direction.
pub fn rgb_to_sh_dc(rgb: [f64; 3]) -> [f32; 3] {
    rgb.map(|c| ((c - 0.5) / SH_C0) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirs() -> Vec<Vector3<f64>> {
        vec![
            Vector3::x(),
            -Vector3::y(),
            Vector3::new(0.3, -0.4, 0.866).normalize(),
            Vector3::new(-1.0, 2.0, -0.5).normalize(),
        ]
    }

    #[test]
    fn zero_coefficients_give_mid_gray() {
        for d in dirs() {
            assert_eq!(eval_sh_color(&[0.0; 3], &[0.0; SH_REST_LEN], &d), [0.5; 3]);
        }
    }

    #[test]
    fn degree_zero_is_isotropic() {
        let dc = [0.4f32, -0.7, 1.1];
        let reference = eval_sh_color(&dc, &[0.0; SH_REST_LEN], &Vector3::z());
        for d in dirs() {
            assert_eq!(eval_sh_color(&dc, &[0.0; SH_REST_LEN], &d), reference);
        }
        assert!((SH_C0 - 1.0 / (2.0 * std::f64::consts::PI.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn degree_one_is_odd() {
        // small coefficients keep the result inside the clamp range
        let mut rest = [0.0f32; SH_REST_LEN];
        for c in 0..3 {
            for k in 0..3 {
                rest[c * 15 + k] = 0.1 * (c as f32 + 1.0) * (k as f32 - 1.2);
            }
        }
        for d in dirs() {
            let plus = eval_sh_color(&[0.0; 3], &rest, &d);
            let minus = eval_sh_color(&[0.0; 3], &rest, &(-d));
            let b = sh_basis_rest(&d);
            for c in 0..3 {
                let deg1: f64 = (0..3).map(|k| b[k] * rest[c * 15 + k] as f64).sum();
                assert!((plus[c] - minus[c] - 2.0 * deg1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dc_inverse() {
        let rgb = [0.1, 0.5, 0.9];
        let c = eval_sh_color(&rgb_to_sh_dc(rgb), &[0.0; SH_REST_LEN], &Vector3::x());
        for i in 0..3 {
            assert!((c[i] - rgb[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn clamps_to_unit_interval() {
        let c = eval_sh_color(&[10.0, -10.0, 0.0], &[0.0; SH_REST_LEN], &Vector3::x());
        assert_eq!(c, [1.0, 0.0, 0.5]);
    }
}
