//! Fidelity metrics: masked PSNR/SSIM, detection precision/recall,
//! segmentation IoU/Dice and difference maps.

mod detection;
mod diff;
mod image;
mod psnr;
mod segmentation;
mod ssim;

pub use self::image::{Image, Region, RegionMask};
pub use detection::{
    box_iou, match_detections, Detection, DetectionClass, DetectionScores, DetectionSet,
    PrecisionRecall, DEFAULT_IOU_THRESHOLD, DETECTION_CONVENTIONS,
};
pub use diff::{diff_map, heat_ramp, DiffMap};
pub use psnr::{masked_mse, psnr, psnr_from_mse, PSNR_PEAK};
pub use segmentation::{
    load_class_mask, save_class_mask, segmentation_scores, ClassSegScore, Palette, PaletteClass,
    SegMaskPair, SegScores,
};
pub use ssim::{gaussian_window, ssim, ssim_from_stats, ssim_maps, SSIM_SIGMA, SSIM_WINDOW};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{} mask selects no pixels", .0.as_str())]
    EmptyMask(Region),
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    TooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("malformed box {index} in {image}: {reason}")]
    MalformedBox {
        image: String,
        index: usize,
        reason: String,
    },
    #[error("palette mismatch: {0}")]
    Palette(String),
    #[error("{0}")]
    Invalid(String),
    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl MetricError {
    pub(crate) fn image(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
