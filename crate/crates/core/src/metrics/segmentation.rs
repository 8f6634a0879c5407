use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteClass {
    pub index: u16,
    pub name: String,
}

/// Class-index palette shared by predicted and ground-truth masks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Palette {
    pub classes: Vec<PaletteClass>,
}

impl Palette {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            classes: names
                .into_iter()
                .enumerate()
                .map(|(i, n)| PaletteClass {
                    index: i as u16,
                    name: n.into(),
                })
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| MetricError::io(path, e))?;
        let p: Palette = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.classes {
            if !seen.insert(c.index) {
                return Err(MetricError::Palette(format!("duplicate class index {}", c.index)));
            }
        }
        Ok(())
    }

    pub fn name_of(&self, index: u16) -> Option<&str> {
        self.classes.iter().find(|c| c.index == index).map(|c| c.name.as_str())
    }

    /// Indices whose names match any of `names` (case-insensitive).
    pub fn indices_named(&self, names: &[&str]) -> Vec<u16> {
        self.classes
            .iter()
            .filter(|c| names.iter().any(|n| c.name.eq_ignore_ascii_case(n)))
            .map(|c| c.index)
            .collect()
    }
}

/// Loads a single-channel 8- or 16-bit class-index PNG.
pub fn load_class_mask(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u16>), MetricError> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| MetricError::image(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img.color() {
        image::ColorType::L8 => img.to_luma8().into_raw().into_iter().map(u16::from).collect(),
        image::ColorType::L16 => img.to_luma16().into_raw(),
        other => {
            return Err(MetricError::Invalid(format!(
                "{}: class mask must be single-channel, found {other:?}",
                path.display()
            )))
        }
    };
    Ok((w, h, data))
}

/// Writes a class-index mask as a 16-bit grayscale PNG.
pub fn save_class_mask(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    data: &[u16],
) -> Result<(), MetricError> {
    let path = path.as_ref();
    let img: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(width as u32, height as u32, data.to_vec())
            .ok_or_else(|| MetricError::Invalid("class mask size mismatch".into()))?;
    img.save(path).map_err(|e| MetricError::image(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegMaskPair {
    pub width: usize,
    pub height: usize,
    pub predicted: Vec<u16>,
    pub ground_truth: Vec<u16>,
    pub palette: Palette,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSegScore {
    pub index: u16,
    pub name: String,
    pub intersection: usize,
    pub predicted: usize,
    pub ground_truth: usize,
    /// `None` when the class is absent from both masks.
    pub iou: Option<f64>,
    pub dice: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub per_class: Vec<ClassSegScore>,
    /// Mean over classes present in at least one mask.
    pub miou: Option<f64>,
    pub mean_dice: Option<f64>,
}

impl SegScores {
    pub fn by_name(&self) -> BTreeMap<&str, &ClassSegScore> {
        self.per_class.iter().map(|c| (c.name.as_str(), c)).collect()
    }
}

pub fn segmentation_scores(pair: &SegMaskPair) -> Result<SegScores, MetricError> {
    let n = pair.width * pair.height;
    if pair.predicted.len() != n || pair.ground_truth.len() != n {
        return Err(MetricError::Invalid(format!(
            "segmentation masks must both hold {n} pixels"
        )));
    }
    pair.palette.validate()?;
    let slot: BTreeMap<u16, usize> = pair
        .palette
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.index, i))
        .collect();
    let lookup = |v: u16, which: &str| {
        slot.get(&v).copied().ok_or_else(|| {
            MetricError::Palette(format!("{which} mask uses class {v} which is not in the palette"))
        })
    };
    let k = pair.palette.classes.len();
    let mut inter = vec![0usize; k];
    let mut pred = vec![0usize; k];
    let mut gt = vec![0usize; k];
    for (&p, &g) in pair.predicted.iter().zip(&pair.ground_truth) {
        let (ps, gs) = (lookup(p, "predicted")?, lookup(g, "ground-truth")?);
        pred[ps] += 1;
        gt[gs] += 1;
        if ps == gs {
            inter[ps] += 1;
        }
    }
    let per_class: Vec<ClassSegScore> = pair
        .palette
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let present = pred[i] + gt[i] > 0;
            let union = pred[i] + gt[i] - inter[i];
            ClassSegScore {
                index: c.index,
                name: c.name.clone(),
                intersection: inter[i],
                predicted: pred[i],
                ground_truth: gt[i],
                iou: present.then(|| inter[i] as f64 / union as f64),
                dice: present.then(|| 2.0 * inter[i] as f64 / (pred[i] + gt[i]) as f64),
            }
        })
        .collect();
    let mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    Ok(SegScores {
        miou: mean(per_class.iter().filter_map(|c| c.iou).collect()),
        mean_dice: mean(per_class.iter().filter_map(|c| c.dice).collect()),
        per_class,
    })
}
