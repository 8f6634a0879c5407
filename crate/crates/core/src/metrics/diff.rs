use std::path::Path;

use super::image::{check_same_dims, Image};
use super::MetricError;

/// Per-pixel mean absolute channel difference.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMap {
    pub width: usize,
    pub height: usize,
    pub raw: Vec<f64>,
}

pub fn diff_map(a: &Image, b: &Image) -> Result<DiffMap, MetricError> {
    check_same_dims(a, b)?;
    let raw = a
        .data
        .chunks_exact(3)
        .zip(b.data.chunks_exact(3))
        .map(|(pa, pb)| pa.iter().zip(pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / 3.0)
        .collect();
    Ok(DiffMap {
        width: a.width,
        height: a.height,
        raw,
    })
}

/// "Hot" ramp: black → red → yellow → white as `v` goes 0 → 1.
///
/// Each channel is non-decreasing in `v`, so the ramp is monotone in luminance.
pub fn heat_ramp(v: f64) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0);
    let ch = |offset: f64| ((3.0 * v - offset).clamp(0.0, 1.0) * 255.0).round() as u8;
    [ch(0.0), ch(1.0), ch(2.0)]
}

impl DiffMap {
    pub fn mean(&self) -> f64 {
        if self.raw.is_empty() {
            0.0
        } else {
            self.raw.iter().sum::<f64>() / self.raw.len() as f64
        }
    }

    pub fn heatmap(&self) -> Image {
        let bytes: Vec<u8> = self.raw.iter().flat_map(|&v| heat_ramp(v)).collect();
        Image::from_rgb8(self.width, self.height, &bytes).expect("heatmap dims")
    }

    pub fn save_heatmap(&self, path: impl AsRef<Path>) -> Result<(), MetricError> {
        self.heatmap().save_png(path)
    }
}
