//! Single-threshold detection scoring with greedy score-ordered matching.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::MetricError;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Empty-set conventions applied by [`match_detections`].
pub const DETECTION_CONVENTIONS: &str =
    "precision = 1 when there are no predictions; recall = 1 when there is no ground truth";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionClass {
    Vehicle,
    Human,
    Other,
}

impl DetectionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectionClass::Vehicle => "vehicle",
            DetectionClass::Human => "human",
            DetectionClass::Other => "other",
        }
    }

    /// Maps common detector label names onto the shared classes.
    pub fn from_label(label: &str) -> Self {
        match label.to_ascii_lowercase().as_str() {
            "vehicle" | "car" | "truck" | "bus" | "van" | "motorcycle" | "bicycle" => {
                DetectionClass::Vehicle
            }
            "human" | "person" | "pedestrian" | "rider" | "cyclist" => DetectionClass::Human,
            _ => DetectionClass::Other,
        }
    }
}

impl<'de> Deserialize<'de> for DetectionClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(DetectionClass::from_label(&s))
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: DetectionClass,
    /// `(x, y, w, h)` in pixels, top-left origin.
    pub bbox: [f64; 4],
    #[serde(default = "one")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    #[serde(default)]
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| MetricError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MetricError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| MetricError::io(path, e))
    }

    /// Validates boxes and clamps them to the image bounds when known.
    pub fn sanitized(&self) -> Result<Vec<Detection>, MetricError> {
        self.detections
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let malformed = |reason: &str| MetricError::MalformedBox {
                    image: self.image_id.clone(),
                    index: i,
                    reason: reason.to_string(),
                };
                let [x, y, w, h] = d.bbox;
                if d.bbox.iter().any(|v| !v.is_finite()) || !d.score.is_finite() {
                    return Err(malformed("non-finite value"));
                }
                if w <= 0.0 || h <= 0.0 {
                    return Err(malformed("non-positive width or height"));
                }
                if !(0.0..=1.0).contains(&d.score) {
                    return Err(malformed("score outside [0, 1]"));
                }
                let (mut x0, mut y0, mut x1, mut y1) = (x, y, x + w, y + h);
                if let Some(iw) = self.width {
                    x0 = x0.clamp(0.0, iw as f64);
                    x1 = x1.clamp(0.0, iw as f64);
                }
                if let Some(ih) = self.height {
                    y0 = y0.clamp(0.0, ih as f64);
                    y1 = y1.clamp(0.0, ih as f64);
                }
                if x1 <= x0 || y1 <= y0 {
                    return Err(malformed("box lies outside the image"));
                }
                Ok(Detection {
                    class: d.class,
                    bbox: [x0, y0, x1 - x0, y1 - y0],
                    score: d.score,
                })
            })
            .collect()
    }
}

/// Intersection over union of two `(x, y, w, h)` boxes.
pub fn box_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a[2] * a[3] + b[2] * b[3] - inter)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
}

impl PrecisionRecall {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub iou_threshold: f64,
    /// Keyed by class name plus `all` for the full image.
    pub per_class: BTreeMap<String, PrecisionRecall>,
    /// `(prediction index, ground-truth index)` pairs, in the original file order.
    pub matches: Vec<(usize, usize)>,
}

impl DetectionScores {
    pub fn all(&self) -> &PrecisionRecall {
        &self.per_class["all"]
    }
}

pub fn match_detections(
    pred: &DetectionSet,
    gt: &DetectionSet,
    iou_threshold: f64,
) -> Result<DetectionScores, MetricError> {
    if !pred.image_id.is_empty() && !gt.image_id.is_empty() && pred.image_id != gt.image_id {
        return Err(MetricError::Invalid(format!(
            "detections for image {} compared against ground truth for {}",
            pred.image_id, gt.image_id
        )));
    }
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(MetricError::Invalid(format!(
            "iou threshold {iou_threshold} outside (0, 1]"
        )));
    }
    let preds = pred.sanitized()?;
    let gts = gt.sanitized()?;

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));

    let mut gt_taken = vec![false; gts.len()];
    let mut pred_matched = vec![false; preds.len()];
    let mut matches = Vec::new();
    for &pi in &order {
        let p = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if gt_taken[gi] || g.class != p.class {
                continue;
            }
            let iou = box_iou(&p.bbox, &g.bbox);
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            gt_taken[gi] = true;
            pred_matched[pi] = true;
            matches.push((pi, gi));
        }
    }
    matches.sort_unstable();

    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    counts.insert("all".into(), (0, 0, 0));
    for (pi, p) in preds.iter().enumerate() {
        for key in ["all", p.class.as_str()] {
            let e = counts.entry(key.into()).or_default();
            if pred_matched[pi] {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    for (gi, g) in gts.iter().enumerate() {
        for key in ["all", g.class.as_str()] {
            let e = counts.entry(key.into()).or_default();
            if !gt_taken[gi] {
                e.2 += 1;
            }
        }
    }
    let per_class = counts
        .into_iter()
        .map(|(k, (tp, fp, fn_))| (k, PrecisionRecall::from_counts(tp, fp, fn_)))
        .collect();
    Ok(DetectionScores {
        iou_threshold,
        per_class,
        matches,
    })
}
