use super::image::{check_same_dims, Image, RegionMask};
use super::MetricError;

/// Peak value for normalized float images.
pub const PSNR_PEAK: f64 = 1.0;

/// Mean squared error over the masked pixels (all channels).
pub fn masked_mse(a: &Image, b: &Image, mask: &RegionMask) -> Result<f64, MetricError> {
    check_same_dims(a, b)?;
    mask.check_dims(a.width, a.height)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, &keep) in mask.data.iter().enumerate() {
        if !keep {
            continue;
        }
        for c in 0..3 {
            let d = a.data[3 * p + c] - b.data[3 * p + c];
            sum += d * d;
        }
        n += 3;
    }
    if n == 0 {
        return Err(MetricError::EmptyMask(mask.region));
    }
    Ok(sum / n as f64)
}

/// PSNR in dB over the masked pixels. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, mask: &RegionMask) -> Result<f64, MetricError> {
    let mse = masked_mse(a, b, mask)?;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PSNR_PEAK * PSNR_PEAK / mse).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Region;

    #[test]
    fn identical_is_infinite() {
        let a = Image::filled(8, 8, [0.3, 0.6, 0.9]);
        assert_eq!(psnr(&a, &a, &RegionMask::full(8, 8)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn one_gray_level_closed_form() {
        let a = Image::from_rgb8(16, 16, &[128; 16 * 16 * 3]).unwrap();
        let b = Image::from_rgb8(16, 16, &[129; 16 * 16 * 3]).unwrap();
        let v = psnr(&a, &b, &RegionMask::full(16, 16)).unwrap();
        assert!((v - 20.0 * 255f64.log10()).abs() < 1e-9);
        assert!((v - 48.1308).abs() < 1e-4);
    }

    #[test]
    fn half_mask_matches_full_for_uniform_error() {
        let a = Image::filled(10, 6, [0.2, 0.4, 0.6]);
        let b = Image::filled(10, 6, [0.25, 0.35, 0.65]);
        let half = RegionMask::from_fn(10, 6, Region::Custom, |x, _| x < 5);
        let full = psnr(&a, &b, &RegionMask::full(10, 6)).unwrap();
        let masked = psnr(&a, &b, &half).unwrap();
        assert!((full - masked).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let a = Image::filled(4, 4, [0.0; 3]);
        let b = Image::filled(5, 4, [0.0; 3]);
        assert!(matches!(
            psnr(&a, &b, &RegionMask::full(4, 4)),
            Err(MetricError::DimensionMismatch { .. })
        ));
        let empty = RegionMask::from_fn(4, 4, Region::NonSky, |_, _| false);
        assert!(matches!(psnr(&a, &a, &empty), Err(MetricError::EmptyMask(Region::NonSky))));
    }
}
