use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetricReport, ReportError, ALL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntendedDataUse {
    Training,
    #[serde(rename = "v&v", alias = "verification_validation")]
    VerificationValidation,
}

/// Granularity at which criteria are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateScope {
    /// Every (direction, bin) row and the pooled `all/all` row.
    #[default]
    PerAggregate,
    /// The pooled `all/all` row only.
    Overall,
    PerFrame,
}

/// What the reference detections were taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorBaseline {
    #[default]
    SimulatorLabels,
    DetectorOnGroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSource {
    /// Same metric on the paired ground-truth batch (a baseline report).
    PairedGroundTruth,
    /// Fixed value from `GateConfig::reference`.
    ReferenceTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// PASS iff `(baseline − observed) / baseline < threshold`.
    RelativeDrop,
    /// PASS iff `observed >= threshold`.
    AbsoluteFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    /// Metric path, e.g. `precision.all`; a trailing `.*` matches every class.
    pub metric: String,
    pub baseline_source: BaselineSource,
    pub comparison: Comparison,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub use_case: String,
    pub intended_data_use: IntendedDataUse,
    #[serde(default)]
    pub asil_note: Option<String>,
    #[serde(default)]
    pub scope: GateScope,
    #[serde(default)]
    pub detector_baseline: DetectorBaseline,
    pub criteria: Vec<Criterion>,
    /// Reference values for `reference_table` criteria, by metric path.
    #[serde(default)]
    pub reference: BTreeMap<String, f64>,
}

/// Name of the only built-in criterion preset.
pub const PRESET_RELATIVE_DROP_10: &str = "relative_drop_10";

impl Default for GateConfig {
    fn default() -> Self {
        Self::preset(PRESET_RELATIVE_DROP_10).expect("built-in preset")
    }
}

impl GateConfig {
    /// Named presets. `relative_drop_10`: precision and recall per class must drop
    /// by less than 10% relative to the paired ground-truth baseline.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            PRESET_RELATIVE_DROP_10 => Some(Self {
                use_case: "generic".into(),
                intended_data_use: IntendedDataUse::VerificationValidation,
                asil_note: None,
                scope: GateScope::PerAggregate,
                detector_baseline: DetectorBaseline::SimulatorLabels,
                criteria: ["precision.*", "recall.*"]
                    .iter()
                    .map(|m| Criterion {
                        metric: m.to_string(),
                        baseline_source: BaselineSource::PairedGroundTruth,
                        comparison: Comparison::RelativeDrop,
                        threshold: 0.10,
                    })
                    .collect(),
                reference: BTreeMap::new(),
            }),
            _ => None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
        let cfg: GateConfig = serde_json::from_str(&text)
            .map_err(|e| ReportError::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if self.criteria.is_empty() {
            return Err(ReportError::InvalidConfig("no criteria".into()));
        }
        for c in &self.criteria {
            if !c.threshold.is_finite() {
                return Err(ReportError::InvalidConfig(format!("{}: threshold not finite", c.metric)));
            }
            if c.comparison == Comparison::RelativeDrop && !(c.threshold > 0.0 && c.threshold <= 1.0) {
                return Err(ReportError::InvalidConfig(format!(
                    "{}: relative_drop threshold {} outside (0, 1]",
                    c.metric, c.threshold
                )));
            }
            if c.metric.is_empty() || c.metric.matches('*').count() > usize::from(c.metric.ends_with(".*")) {
                return Err(ReportError::InvalidConfig(format!("bad metric path `{}`", c.metric)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    /// `direction/bin` or frame id.
    pub scope: String,
    pub metric: String,
    #[serde(with = "super::inf_as_null")]
    pub observed: f64,
    #[serde(with = "super::inf_as_null")]
    pub baseline: f64,
    /// Relative drop; `None` for absolute floors.
    pub drop: Option<f64>,
    pub comparison: Comparison,
    pub threshold: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub schema_version: u32,
    pub use_case: String,
    pub intended_data_use: IntendedDataUse,
    pub asil_note: Option<String>,
    pub scope: GateScope,
    pub detector_baseline: DetectorBaseline,
    pub checks: Vec<CheckResult>,
    pub overall: Verdict,
    pub reasons: Vec<String>,
}

/// Baseline values for `paired_ground_truth` criteria.
#[derive(Debug, Clone, Copy)]
pub enum Baseline<'a> {
    Report(&'a MetricReport),
    /// No paired report; only `reference_table` criteria can be evaluated.
    None,
}

/// `(baseline − observed) / baseline`, with infinite PSNR handled explicitly.
pub fn relative_drop(baseline: f64, observed: f64) -> f64 {
    match (baseline.is_infinite(), observed.is_infinite()) {
        (true, true) => 0.0,
        (true, false) => 1.0,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => (baseline - observed) / baseline,
    }
}

fn expand(pattern: &str, observed: &BTreeMap<String, f64>, baseline: &dyn Fn(&str) -> Option<f64>) -> Vec<String> {
    match pattern.strip_suffix('*') {
        Some(prefix) => observed
            .keys()
            .filter(|k| k.starts_with(prefix) && baseline(k).is_some())
            .cloned()
            .collect(),
        None => vec![pattern.to_string()],
    }
}

struct Row {
    scope: String,
    observed: BTreeMap<String, f64>,
    paired: Option<BTreeMap<String, f64>>,
}

fn rows(report: &MetricReport, baseline: Baseline<'_>, scope: GateScope) -> Result<Vec<Row>, ReportError> {
    let agg_map = |a: &super::Aggregate| a.metrics.iter().map(|(k, s)| (k.clone(), s.mean)).collect();
    let mut out = Vec::new();
    match scope {
        GateScope::PerAggregate | GateScope::Overall => {
            for a in &report.aggregates {
                if scope == GateScope::Overall && !(a.direction == ALL && a.bin == ALL) {
                    continue;
                }
                let paired = match baseline {
                    Baseline::Report(b) => Some(
                        b.aggregate(&a.direction, &a.bin)
                            .map(agg_map)
                            .ok_or_else(|| ReportError::MissingMetric {
                                metric: "*".into(),
                                scope: format!("baseline row {}", a.key()),
                            })?,
                    ),
                    Baseline::None => None,
                };
                out.push(Row {
                    scope: a.key(),
                    observed: agg_map(a),
                    paired,
                });
            }
        }
        GateScope::PerFrame => {
            for f in &report.frames {
                let paired = match baseline {
                    Baseline::Report(b) => Some(
                        b.frame(&f.frame_id)
                            .map(|bf| bf.metrics())
                            .ok_or_else(|| ReportError::MissingMetric {
                                metric: "*".into(),
                                scope: format!("baseline frame {}", f.frame_id),
                            })?,
                    ),
                    Baseline::None => None,
                };
                out.push(Row {
                    scope: f.frame_id.clone(),
                    observed: f.metrics(),
                    paired,
                });
            }
        }
    }
    Ok(out)
}

/// Checks every criterion at the configured scope. Overall PASS iff every check passes.
pub fn apply_gate(
    report: &MetricReport,
    baseline: Baseline<'_>,
    config: &GateConfig,
) -> Result<GateDecision, ReportError> {
    config.validate()?;
    let mut checks = Vec::new();
    for row in rows(report, baseline, config.scope)? {
        for c in &config.criteria {
            let lookup = |path: &str| -> Option<f64> {
                match c.comparison {
                    Comparison::AbsoluteFloor => Some(c.threshold),
                    Comparison::RelativeDrop => match c.baseline_source {
                        BaselineSource::ReferenceTable => config.reference.get(path).copied(),
                        BaselineSource::PairedGroundTruth => row.paired.as_ref()?.get(path).copied(),
                    },
                }
            };
            if c.comparison == Comparison::RelativeDrop
                && c.baseline_source == BaselineSource::PairedGroundTruth
                && row.paired.is_none()
            {
                return Err(ReportError::InvalidConfig(format!(
                    "criterion `{}` needs a paired ground-truth baseline report",
                    c.metric
                )));
            }
            let paths = expand(&c.metric, &row.observed, &lookup);
            if paths.is_empty() {
                return Err(ReportError::MissingMetric {
                    metric: c.metric.clone(),
                    scope: row.scope.clone(),
                });
            }
            for path in paths {
                let missing = || ReportError::MissingMetric {
                    metric: path.clone(),
                    scope: row.scope.clone(),
                };
                let observed = *row.observed.get(&path).ok_or_else(missing)?;
                let base = lookup(&path).ok_or_else(missing)?;
                let (drop, pass) = match c.comparison {
                    Comparison::RelativeDrop => {
                        if base == 0.0 {
                            return Err(ReportError::UndefinedCriterion {
                                metric: path.clone(),
                                scope: row.scope.clone(),
                            });
                        }
                        let d = relative_drop(base, observed);
                        (Some(d), d < c.threshold)
                    }
                    Comparison::AbsoluteFloor => (None, observed >= c.threshold),
                };
                checks.push(CheckResult {
                    scope: row.scope.clone(),
                    metric: path,
                    observed,
                    baseline: base,
                    drop,
                    comparison: c.comparison,
                    threshold: c.threshold,
                    verdict: if pass { Verdict::Pass } else { Verdict::Fail },
                });
            }
        }
    }
    let failed: Vec<&CheckResult> = checks.iter().filter(|c| c.verdict == Verdict::Fail).collect();
    let reasons = if failed.is_empty() {
        vec![format!("all {} checks passed", checks.len())]
    } else {
        failed
            .iter()
            .map(|c| match c.drop {
                Some(d) => format!(
                    "{} at {}: drop {:.4} >= {} (observed {:.4}, baseline {:.4})",
                    c.metric, c.scope, d, c.threshold, c.observed, c.baseline
                ),
                None => format!(
                    "{} at {}: observed {:.4} below floor {}",
                    c.metric, c.scope, c.observed, c.threshold
                ),
            })
            .collect()
    };
    Ok(GateDecision {
        schema_version: super::REPORT_SCHEMA_VERSION,
        use_case: config.use_case.clone(),
        intended_data_use: config.intended_data_use,
        asil_note: config.asil_note.clone(),
        scope: config.scope,
        detector_baseline: config.detector_baseline,
        overall: if failed.is_empty() { Verdict::Pass } else { Verdict::Fail },
        checks,
        reasons,
    })
}
