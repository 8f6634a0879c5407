//! Windowed SSIM with an 11x11 Gaussian window (sigma 1.5).
//!
//! The local SSIM map is defined at every pixel whose window lies fully
//! inside the image. The masked score is the mean of that map over window
//! centers selected by the mask, averaged over the three channels.

use super::image::{check_same_dims, Image, RegionMask};
use super::MetricError;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 1.0;

/// Normalized 1D Gaussian window.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w: [f64; SSIM_WINDOW] =
        std::array::from_fn(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Local SSIM from window statistics.
#[inline]
pub fn ssim_from_stats(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64) -> f64 {
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// Valid-mode separable convolution of a single-channel plane.
fn blur_valid(plane: &[f64], width: usize, height: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let out_w = width - SSIM_WINDOW + 1;
    let out_h = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; out_w * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..out_w {
            rows[y * out_w + x] = w.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for y in 0..out_h {
        for x in 0..out_w {
            out[y * out_w + x] = w
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * rows[(y + k) * out_w + x])
                .sum();
        }
    }
    out
}

/// Per-channel local SSIM maps, each `(width-10) x (height-10)`, indexed by
/// window origin (the center pixel is offset by 5 in each axis).
pub fn ssim_maps(a: &Image, b: &Image) -> Result<[Vec<f64>; 3], MetricError> {
    check_same_dims(a, b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(MetricError::TooSmall {
            width: a.width,
            height: a.height,
            window: SSIM_WINDOW,
        });
    }
    let (w, h) = a.dims();
    let win = gaussian_window();
    let channel = |img: &Image, c: usize| -> Vec<f64> { img.data.iter().skip(c).step_by(3).copied().collect() };
    let maps = std::array::from_fn(|c| {
        let pa = channel(a, c);
        let pb = channel(b, c);
        let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mu_a = blur_valid(&pa, w, h, &win);
        let mu_b = blur_valid(&pb, w, h, &win);
        let e_aa = blur_valid(&aa, w, h, &win);
        let e_bb = blur_valid(&bb, w, h, &win);
        let e_ab = blur_valid(&ab, w, h, &win);
        (0..mu_a.len())
            .map(|i| {
                let (ma, mb) = (mu_a[i], mu_b[i]);
                ssim_from_stats(ma, mb, e_aa[i] - ma * ma, e_bb[i] - mb * mb, e_ab[i] - ma * mb)
            })
            .collect()
    });
    Ok(maps)
}

/// Mean local SSIM over masked window centers.
pub fn ssim(a: &Image, b: &Image, mask: &RegionMask) -> Result<f64, MetricError> {
    mask.check_dims(a.width, a.height)?;
    let maps = ssim_maps(a, b)?;
    let half = SSIM_WINDOW / 2;
    let out_w = a.width - SSIM_WINDOW + 1;
    let out_h = a.height - SSIM_WINDOW + 1;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..out_h {
        for x in 0..out_w {
            if mask.get(x + half, y + half) {
                let i = y * out_w + x;
                sum += maps[0][i] + maps[1][i] + maps[2][i];
                n += 3;
            }
        }
    }
    if n == 0 {
        return Err(MetricError::EmptyMask(mask.region));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Region;

    fn checkerboard(n: usize) -> Image {
        let mut img = Image::filled(n, n, [0.0; 3]);
        for y in 0..n {
            for x in 0..n {
                if (x + y) % 2 == 0 {
                    img.set_pixel(x, y, [1.0; 3]);
                }
            }
        }
        img
    }

    #[test]
    fn identical_is_one() {
        let a = checkerboard(16);
        let s = ssim(&a, &a, &RegionMask::full(16, 16)).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverted_binary_is_negative() {
        let a = checkerboard(16);
        let mut b = a.clone();
        b.data.iter_mut().for_each(|v| *v = 1.0 - *v);
        assert!(ssim(&a, &b, &RegionMask::full(16, 16)).unwrap() < 0.0);
    }

    #[test]
    fn window_is_normalized_and_symmetric() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(w[i], w[SSIM_WINDOW - 1 - i]);
        }
    }

    #[test]
    fn too_small_and_mask_errors() {
        let a = Image::filled(10, 20, [0.5; 3]);
        assert!(matches!(
            ssim(&a, &a, &RegionMask::full(10, 20)),
            Err(MetricError::TooSmall { .. })
        ));
        // mask only covers the border band where no full window fits
        let a = Image::filled(20, 20, [0.5; 3]);
        let border = RegionMask::from_fn(20, 20, Region::Custom, |x, _| x < 3);
        assert!(matches!(ssim(&a, &a, &border), Err(MetricError::EmptyMask(_))));
    }
}
