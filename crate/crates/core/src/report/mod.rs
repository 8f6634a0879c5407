//! Per-frame KPI collection, aggregation, use-case gating and report files.

mod emit;
mod gate;

pub use emit::{emit_report, frames_csv, series_csv, summary_text};
pub use gate::{
    apply_gate, Baseline, CheckResult, Comparison, Criterion, DetectorBaseline, GateConfig,
    GateDecision, GateScope, IntendedDataUse, Verdict, BaselineSource,
};

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    match_detections, psnr, segmentation_scores, ssim, DetectionSet, Image, MetricError, Palette,
    Region, RegionMask, SegMaskPair, SegScores, DEFAULT_IOU_THRESHOLD, DETECTION_CONVENTIONS,
};
use crate::metrics::PrecisionRecall;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Batches with more than this fraction of skipped frames are rejected.
pub const MAX_SKIPPED_FRACTION: f64 = 0.5;

/// Label of the pooled aggregate row.
pub const ALL: &str = "all";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("batch has no frames")]
    EmptyBatch,
    #[error("{skipped} of {total} frames skipped; first: {first}")]
    SystematicMismatch {
        skipped: usize,
        total: usize,
        first: String,
    },
    #[error("duplicate frame id {0}")]
    DuplicateFrame(String),
    #[error("metric `{metric}` missing for {scope}")]
    MissingMetric { metric: String, scope: String },
    #[error("criterion `{metric}` at {scope}: baseline is 0, relative drop undefined; use absolute_floor")]
    UndefinedCriterion { metric: String, scope: String },
    #[error("invalid gate config: {0}")]
    InvalidConfig(String),
    #[error("aggregate mismatch in {row}: {metric}")]
    AggregateMismatch { row: String, metric: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl ReportError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

/// Serializes non-finite values as `null`; reads `null` back as `+inf`.
pub mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Inputs for one frame of a batch.
#[derive(Debug, Clone, Default)]
pub struct FrameInput {
    pub frame_id: String,
    pub direction: String,
    pub bin: String,
    pub magnitude: Option<f64>,
    pub rendered: Option<Image>,
    pub ground_truth: Option<Image>,
    /// Regions beyond the full image. Empty masks are ignored.
    pub regions: Vec<RegionMask>,
    /// `(predicted on render, reference)` detections.
    pub detections: Option<(DetectionSet, DetectionSet)>,
    pub segmentation: Option<SegMaskPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScores {
    pub pixels: usize,
    #[serde(with = "inf_as_null")]
    pub psnr: f64,
    pub psnr_infinite: bool,
    /// `None` when the image is smaller than the SSIM window.
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    pub direction: String,
    pub bin: String,
    pub magnitude: Option<f64>,
    pub regions: BTreeMap<String, RegionScores>,
    pub detection: Option<BTreeMap<String, PrecisionRecall>>,
    pub segmentation: Option<SegScores>,
}

impl FrameRecord {
    /// Flat metric paths: `psnr.<region>`, `ssim.<region>`, `precision.<class>`,
    /// `recall.<class>`, `iou.<class>`, `dice.<class>`, `miou`, `mean_dice`.
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for (region, s) in &self.regions {
            m.insert(format!("psnr.{region}"), s.psnr);
            if let Some(v) = s.ssim {
                m.insert(format!("ssim.{region}"), v);
            }
        }
        if let Some(det) = &self.detection {
            for (class, pr) in det {
                m.insert(format!("precision.{class}"), pr.precision);
                m.insert(format!("recall.{class}"), pr.recall);
            }
        }
        if let Some(seg) = &self.segmentation {
            for c in &seg.per_class {
                if let (Some(iou), Some(dice)) = (c.iou, c.dice) {
                    m.insert(format!("iou.{}", c.name), iou);
                    m.insert(format!("dice.{}", c.name), dice);
                }
            }
            if let Some(v) = seg.miou {
                m.insert("miou".into(), v);
            }
            if let Some(v) = seg.mean_dice {
                m.insert("mean_dice".into(), v);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFrame {
    pub frame_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    #[serde(with = "inf_as_null")]
    pub mean: f64,
    pub infinite: bool,
    /// Frames contributing to the mean.
    pub count: usize,
}

/// Means over the frames of one (direction, bin) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub direction: String,
    pub bin: String,
    pub magnitude: Option<f64>,
    pub frames: usize,
    pub metrics: BTreeMap<String, MetricStat>,
}

impl Aggregate {
    pub fn key(&self) -> String {
        format!("{}/{}", self.direction, self.bin)
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub scene_hash: Option<String>,
    pub edit_script_hash: Option<String>,
    pub detector_source: Option<String>,
    pub mask_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub scenario_id: String,
    pub iou_threshold: f64,
    pub provenance: Provenance,
    pub conventions: Vec<String>,
    pub caveats: Vec<String>,
    pub frames: Vec<FrameRecord>,
    pub skipped: Vec<SkippedFrame>,
    pub aggregates: Vec<Aggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub scenario_id: String,
    pub iou_threshold: f64,
    pub provenance: Provenance,
    pub caveats: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            scenario_id: "scenario".into(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            provenance: Provenance::default(),
            caveats: Vec::new(),
        }
    }
}

pub fn conventions() -> Vec<String> {
    vec![
        "psnr: peak 1.0 on [0,1] images; identical inputs give +inf, written as null with psnr_infinite/infinite = true".into(),
        "ssim: 11x11 gaussian window, sigma 1.5, valid mode, channel mean; region masks select window centers".into(),
        format!("detection: greedy score-ordered matching within class; {DETECTION_CONVENTIONS}"),
        "segmentation: classes absent from both masks are excluded from miou and mean_dice".into(),
        "aggregates: unweighted means over frames where the metric is defined".into(),
    ]
}

/// Region masks derived from a ground-truth class mask: non-sky, vehicle and human.
pub fn regions_from_segmentation(width: usize, height: usize, gt: &[u16], palette: &Palette) -> Vec<RegionMask> {
    let sky = palette.indices_named(&["sky"]);
    let vehicle = palette.indices_named(&["vehicle", "car", "truck", "bus"]);
    let human = palette.indices_named(&["human", "person", "pedestrian", "rider"]);
    let mask = |region: Region, keep: &dyn Fn(u16) -> bool| RegionMask {
        width,
        height,
        data: gt.iter().map(|&c| keep(c)).collect(),
        region,
    };
    vec![
        mask(Region::NonSky, &|c| !sky.contains(&c)),
        mask(Region::Vehicle, &|c| vehicle.contains(&c)),
        mask(Region::Human, &|c| human.contains(&c)),
    ]
}

enum Outcome {
    Record(FrameRecord),
    Skipped(SkippedFrame),
}

fn evaluate_frame(input: &FrameInput, iou_threshold: f64) -> Outcome {
    let skip = |reason: String| {
        Outcome::Skipped(SkippedFrame {
            frame_id: input.frame_id.clone(),
            reason,
        })
    };
    let (rendered, gt) = match (&input.rendered, &input.ground_truth) {
        (Some(r), Some(g)) => (r, g),
        (None, _) => return skip("missing rendered frame".into()),
        (_, None) => return skip("missing ground-truth frame".into()),
    };
    match score_frame(input, rendered, gt, iou_threshold) {
        Ok(r) => Outcome::Record(r),
        Err(e) => skip(e.to_string()),
    }
}

fn score_frame(
    input: &FrameInput,
    rendered: &Image,
    gt: &Image,
    iou_threshold: f64,
) -> Result<FrameRecord, MetricError> {
    let (w, h) = gt.dims();
    let mut regions = BTreeMap::new();
    let full = RegionMask::full(w, h);
    for mask in std::iter::once(&full).chain(&input.regions) {
        if mask.is_empty() {
            continue;
        }
        let p = psnr(rendered, gt, mask)?;
        let s = match ssim(rendered, gt, mask) {
            Ok(v) => Some(v),
            Err(MetricError::TooSmall { .. }) | Err(MetricError::EmptyMask(_)) => None,
            Err(e) => return Err(e),
        };
        regions.insert(
            mask.region.as_str().to_string(),
            RegionScores {
                pixels: mask.count(),
                psnr: p,
                psnr_infinite: p.is_infinite(),
                ssim: s,
            },
        );
    }
    let detection = match &input.detections {
        Some((pred, reference)) => Some(match_detections(pred, reference, iou_threshold)?.per_class),
        None => None,
    };
    let segmentation = match &input.segmentation {
        Some(pair) => Some(segmentation_scores(pair)?),
        None => None,
    };
    Ok(FrameRecord {
        frame_id: input.frame_id.clone(),
        direction: input.direction.clone(),
        bin: input.bin.clone(),
        magnitude: input.magnitude,
        regions,
        detection,
        segmentation,
    })
}

/// Scores every frame (in parallel) and aggregates per (direction, bin).
pub fn evaluate_batch(inputs: &[FrameInput], config: &EvalConfig) -> Result<MetricReport, ReportError> {
    if inputs.is_empty() {
        return Err(ReportError::EmptyBatch);
    }
    let mut seen = std::collections::BTreeSet::new();
    for f in inputs {
        if !seen.insert(f.frame_id.as_str()) {
            return Err(ReportError::DuplicateFrame(f.frame_id.clone()));
        }
    }
    let outcomes: Vec<Outcome> = inputs
        .par_iter()
        .map(|f| evaluate_frame(f, config.iou_threshold))
        .collect();
    let mut frames = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Record(r) => frames.push(r),
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    if skipped.len() as f64 > MAX_SKIPPED_FRACTION * inputs.len() as f64 || frames.is_empty() {
        return Err(ReportError::SystematicMismatch {
            skipped: skipped.len(),
            total: inputs.len(),
            first: skipped
                .first()
                .map(|s| format!("{}: {}", s.frame_id, s.reason))
                .unwrap_or_default(),
        });
    }
    let aggregates = compute_aggregates(&frames);
    Ok(MetricReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario_id: config.scenario_id.clone(),
        iou_threshold: config.iou_threshold,
        provenance: config.provenance.clone(),
        conventions: conventions(),
        caveats: config.caveats.clone(),
        frames,
        skipped,
        aggregates,
    })
}

fn mean_stat(values: &[f64]) -> MetricStat {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    MetricStat {
        mean,
        infinite: mean.is_infinite(),
        count: values.len(),
    }
}

fn aggregate_rows<'a>(
    direction: &str,
    bin: &str,
    rows: impl Iterator<Item = &'a FrameRecord>,
) -> Aggregate {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut frames = 0;
    let mut magnitudes = Vec::new();
    for r in rows {
        frames += 1;
        magnitudes.push(r.magnitude);
        for (k, v) in r.metrics() {
            values.entry(k).or_default().push(v);
        }
    }
    let magnitude = match magnitudes.first() {
        Some(&m) if magnitudes.iter().all(|&x| x == m) => m,
        _ => None,
    };
    Aggregate {
        direction: direction.to_string(),
        bin: bin.to_string(),
        magnitude,
        frames,
        metrics: values.iter().map(|(k, v)| (k.clone(), mean_stat(v))).collect(),
    }
}

/// One row per (direction, bin) in order of first appearance, then `all/all`.
pub fn compute_aggregates(frames: &[FrameRecord]) -> Vec<Aggregate> {
    let mut groups: Vec<(&str, &str)> = Vec::new();
    for f in frames {
        let g = (f.direction.as_str(), f.bin.as_str());
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let mut out: Vec<Aggregate> = groups
        .iter()
        .map(|&(d, b)| aggregate_rows(d, b, frames.iter().filter(|f| f.direction == d && f.bin == b)))
        .collect();
    out.push(aggregate_rows(ALL, ALL, frames.iter()));
    out
}

impl MetricReport {
    pub fn aggregate(&self, direction: &str, bin: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.direction == direction && a.bin == bin)
    }

    pub fn overall(&self) -> &Aggregate {
        self.aggregate(ALL, ALL).expect("report has an all/all aggregate")
    }

    pub fn frame(&self, id: &str) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.frame_id == id)
    }

    /// Checks the stored aggregates against a recomputation from the frames.
    pub fn verify_aggregates(&self) -> Result<(), ReportError> {
        let fresh = compute_aggregates(&self.frames);
        if fresh.len() != self.aggregates.len() {
            return Err(ReportError::AggregateMismatch {
                row: "*".into(),
                metric: format!("{} rows vs {}", self.aggregates.len(), fresh.len()),
            });
        }
        for (a, b) in self.aggregates.iter().zip(&fresh) {
            let bad = |metric: &str| ReportError::AggregateMismatch {
                row: b.key(),
                metric: metric.to_string(),
            };
            if a.key() != b.key() || a.frames != b.frames || a.metrics.len() != b.metrics.len() {
                return Err(bad("shape"));
            }
            for (k, sb) in &b.metrics {
                let sa = a.metrics.get(k).ok_or_else(|| bad(k))?;
                let same = (sa.mean == sb.mean) || (sa.mean - sb.mean).abs() <= 1e-12;
                if !same || sa.count != sb.count {
                    return Err(bad(k));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Detection, DetectionClass};

    fn img(v: f64) -> Image {
        Image::filled(16, 16, [v, v * 0.5, 0.2])
    }

    fn dets(boxes: &[[f64; 4]]) -> DetectionSet {
        DetectionSet {
            detections: boxes
                .iter()
                .map(|&bbox| Detection {
                    class: DetectionClass::Vehicle,
                    bbox,
                    score: 0.9,
                })
                .collect(),
            ..Default::default()
        }
    }

    fn frame(id: &str, bin: &str, rendered: f64) -> FrameInput {
        FrameInput {
            frame_id: id.into(),
            direction: "lateral".into(),
            bin: bin.into(),
            magnitude: Some(0.5),
            rendered: Some(img(rendered)),
            ground_truth: Some(img(0.6)),
            detections: Some((dets(&[[1.0, 1.0, 5.0, 5.0]]), dets(&[[1.0, 1.0, 5.0, 5.0]]))),
            ..Default::default()
        }
    }

    #[test]
    fn identity_batch() {
        let inputs = vec![frame("a", "near", 0.6), frame("b", "near", 0.6), frame("c", "far", 0.6)];
        let r = evaluate_batch(&inputs, &EvalConfig::default()).unwrap();
        assert_eq!(r.aggregates.len(), 3);
        let all = r.overall();
        assert_eq!(all.frames, 3);
        assert!(all.metrics["psnr.full"].infinite);
        assert_eq!(all.get("ssim.full"), Some(1.0));
        assert_eq!(all.get("precision.all"), Some(1.0));
        assert_eq!(all.get("recall.vehicle"), Some(1.0));
        r.verify_aggregates().unwrap();
    }

    #[test]
    fn json_round_trip_keeps_infinity() {
        let r = evaluate_batch(&[frame("a", "near", 0.6)], &EvalConfig::default()).unwrap();
        let text = r.to_json();
        assert!(text.contains("\"psnr\": null"));
        let back = MetricReport::from_json(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn skipped_frames() {
        let mut missing = frame("b", "near", 0.6);
        missing.rendered = None;
        let r = evaluate_batch(&[frame("a", "near", 0.5), missing], &EvalConfig::default()).unwrap();
        assert_eq!(r.frames.len(), 1);
        assert_eq!(r.skipped[0].reason, "missing rendered frame");

        let mut m1 = frame("x", "near", 0.6);
        m1.ground_truth = None;
        let mut m2 = frame("y", "near", 0.6);
        m2.ground_truth = Some(Image::filled(3, 3, [0.0; 3]));
        let err = evaluate_batch(&[frame("a", "near", 0.5), m1, m2], &EvalConfig::default()).unwrap_err();
        assert!(matches!(err, ReportError::SystematicMismatch { skipped: 2, total: 3, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = evaluate_batch(&[frame("a", "near", 0.6), frame("a", "far", 0.6)], &EvalConfig::default());
        assert!(matches!(err, Err(ReportError::DuplicateFrame(_))));
    }

    #[test]
    fn aggregate_means() {
        let r = evaluate_batch(
            &[frame("a", "near", 0.5), frame("b", "near", 0.4)],
            &EvalConfig::default(),
        )
        .unwrap();
        let near = r.aggregate("lateral", "near").unwrap();
        let p: Vec<f64> = r.frames.iter().map(|f| f.regions["full"].psnr).collect();
        assert!((near.get("psnr.full").unwrap() - (p[0] + p[1]) / 2.0).abs() < 1e-12);
        assert_eq!(near.magnitude, Some(0.5));
    }

    #[test]
    fn empty_regions_ignored() {
        let mut f = frame("a", "near", 0.6);
        f.regions.push(RegionMask {
            width: 16,
            height: 16,
            data: vec![false; 256],
            region: Region::Human,
        });
        let r = evaluate_batch(&[f], &EvalConfig::default()).unwrap();
        assert!(!r.frames[0].regions.contains_key("human"));
    }

    #[test]
    fn segmentation_regions() {
        let palette = Palette::new(["road", "car", "person", "sky"]);
        let gt = vec![0, 1, 2, 3];
        let regions = regions_from_segmentation(2, 2, &gt, &palette);
        assert_eq!(regions[0].data, vec![true, true, true, false]);
        assert_eq!(regions[1].data, vec![false, true, false, false]);
        assert_eq!(regions[2].data, vec![false, false, true, false]);
    }
}
