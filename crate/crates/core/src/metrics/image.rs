use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Float RGB image, row-major interleaved, nominal range [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, MetricError> {
        if data.len() != 3 * width * height {
            return Err(MetricError::Invalid(format!(
                "image buffer has {} values, expected {}",
                data.len(),
                3 * width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self {
            width,
            height,
            data,
        }
    }

    /// 8-bit input, normalized by 255.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self, MetricError> {
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Loads a PNG (or any format the `image` crate decodes). 16-bit inputs
    /// are normalized by 65535, everything else by 255.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| MetricError::image(path, e))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let sixteen = matches!(
            img.color(),
            image::ColorType::L16
                | image::ColorType::La16
                | image::ColorType::Rgb16
                | image::ColorType::Rgba16
        );
        if sixteen {
            let buf = img.to_rgb16();
            Self::new(w, h, buf.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        } else {
            Self::from_rgb8(w, h, &img.to_rgb8().into_raw())
        }
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Writes an 8-bit RGB PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), MetricError> {
        let path = path.as_ref();
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .expect("image buffer size");
        buf.save(path).map_err(|e| MetricError::image(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Full,
    NonSky,
    Vehicle,
    Human,
    Custom,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Full => "full",
            Region::NonSky => "non_sky",
            Region::Vehicle => "vehicle",
            Region::Human => "human",
            Region::Custom => "custom",
        }
    }
}

/// Boolean pixel selection for region-restricted metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
    pub region: Region,
}

impl RegionMask {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
            region: Region::Full,
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        region: Region,
        f: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            data,
            region,
        }
    }

    /// Non-sky mask from accumulated render opacity: `alpha >= threshold`.
    pub fn non_sky_from_alpha(width: usize, height: usize, alpha: &[f64], threshold: f64) -> Self {
        Self {
            width,
            height,
            data: alpha.iter().map(|&a| a >= threshold).collect(),
            region: Region::NonSky,
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub(crate) fn check_dims(&self, width: usize, height: usize) -> Result<(), MetricError> {
        if (self.width, self.height) != (width, height) || self.data.len() != width * height {
            return Err(MetricError::DimensionMismatch {
                left: (self.width, self.height),
                right: (width, height),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_same_dims(a: &Image, b: &Image) -> Result<(), MetricError> {
    if a.dims() != b.dims() {
        return Err(MetricError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}
