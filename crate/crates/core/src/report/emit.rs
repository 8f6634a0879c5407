use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{GateDecision, MetricReport, ReportError, ALL};

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::io("csv buffer", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per scored frame; metric columns are the union of all frame metric paths.
pub fn frames_csv(report: &MetricReport) -> Result<String, ReportError> {
    let per_frame: Vec<_> = report.frames.iter().map(|f| f.metrics()).collect();
    let columns: BTreeSet<&String> = per_frame.iter().flat_map(|m| m.keys()).collect();
    let mut rows = vec![["frame_id", "direction", "bin", "magnitude"]
        .iter()
        .map(|s| s.to_string())
        .chain(columns.iter().map(|c| c.to_string()))
        .collect()];
    for (f, m) in report.frames.iter().zip(&per_frame) {
        let mut row = vec![f.frame_id.clone(), f.direction.clone(), f.bin.clone(), opt(f.magnitude)];
        row.extend(columns.iter().map(|c| opt(m.get(*c).copied())));
        rows.push(row);
    }
    csv_string(rows)
}

/// Metric-vs-offset series for one direction: one row per bin.
pub fn series_csv(report: &MetricReport, direction: &str) -> Result<String, ReportError> {
    let aggs: Vec<_> = report.aggregates.iter().filter(|a| a.direction == direction).collect();
    let columns: BTreeSet<&String> = aggs.iter().flat_map(|a| a.metrics.keys()).collect();
    let mut rows = vec![["bin", "magnitude", "frames"]
        .iter()
        .map(|s| s.to_string())
        .chain(columns.iter().map(|c| c.to_string()))
        .collect()];
    for a in aggs {
        let mut row = vec![a.bin.clone(), opt(a.magnitude), a.frames.to_string()];
        row.extend(columns.iter().map(|c| opt(a.get(c))));
        rows.push(row);
    }
    csv_string(rows)
}

const SUMMARY_METRICS: [&str; 4] = ["psnr.full", "ssim.full", "precision.all", "recall.all"];

pub fn summary_text(report: &MetricReport, decision: Option<&GateDecision>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", report.scenario_id);
    let _ = writeln!(
        s,
        "frames: {} scored, {} skipped",
        report.frames.len(),
        report.skipped.len()
    );
    if let Some(d) = decision {
        let _ = writeln!(s, "use case: {}", d.use_case);
        let _ = writeln!(s, "overall: {}", d.overall);
        for r in &d.reasons {
            let _ = writeln!(s, "  - {r}");
        }
        let max_drop = d
            .checks
            .iter()
            .filter_map(|c| c.drop)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        if let Some(m) = max_drop {
            let _ = writeln!(s, "max relative drop: {}", num(m));
        }
    }
    let _ = writeln!(s, "\naggregates:");
    let _ = writeln!(s, "  {:<28} {:>6} {}", "row", "frames", SUMMARY_METRICS.join("  "));
    for a in &report.aggregates {
        let vals: Vec<String> = SUMMARY_METRICS
            .iter()
            .map(|m| a.get(m).map(|v| format!("{:.4}", v)).unwrap_or_else(|| "-".into()))
            .collect();
        let _ = writeln!(s, "  {:<28} {:>6} {}", a.key(), a.frames, vals.join("  "));
    }
    if !report.skipped.is_empty() {
        let _ = writeln!(s, "\nskipped:");
        for k in &report.skipped {
            let _ = writeln!(s, "  {}: {}", k.frame_id, k.reason);
        }
    }
    if !report.caveats.is_empty() {
        let _ = writeln!(s, "\ncaveats:");
        for c in &report.caveats {
            let _ = writeln!(s, "  - {c}");
        }
    }
    s
}

fn write(path: PathBuf, text: &str, out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    fs::write(&path, text).map_err(|e| ReportError::io(&path, e))?;
    out.push(path);
    Ok(())
}

/// Writes `report.json`, `gate.json` (with a decision), `frames.csv`,
/// `series_<direction>.csv` and `summary.txt`. Output is byte-stable.
pub fn emit_report(
    report: &MetricReport,
    decision: Option<&GateDecision>,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, ReportError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| ReportError::io(dir, e))?;
    let mut out = Vec::new();
    write(dir.join("report.json"), &report.to_json(), &mut out)?;
    if let Some(d) = decision {
        let text = serde_json::to_string_pretty(d)? + "\n";
        write(dir.join("gate.json"), &text, &mut out)?;
    }
    write(dir.join("frames.csv"), &frames_csv(report)?, &mut out)?;
    let mut directions: Vec<&str> = Vec::new();
    for a in &report.aggregates {
        if a.direction != ALL && !directions.contains(&a.direction.as_str()) {
            directions.push(&a.direction);
        }
    }
    for d in directions {
        write(dir.join(format!("series_{d}.csv")), &series_csv(report, d)?, &mut out)?;
    }
    write(dir.join("summary.txt"), &summary_text(report, decision), &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Image;
    use crate::report::{apply_gate, evaluate_batch, Baseline, EvalConfig, FrameInput, GateConfig};

    fn batch() -> MetricReport {
        let inputs: Vec<FrameInput> = ["near", "medium", "far"]
            .iter()
            .enumerate()
            .flat_map(|(i, bin)| {
                (0..2).map(move |k| FrameInput {
                    frame_id: format!("lateral-{bin}-{k:05}"),
                    direction: "lateral".into(),
                    bin: bin.to_string(),
                    magnitude: Some([0.5, 1.6, 3.2][i]),
                    rendered: Some(Image::filled(12, 12, [0.5 + 0.05 * i as f64, 0.5, 0.5])),
                    ground_truth: Some(Image::filled(12, 12, [0.5, 0.5, 0.5])),
                    ..Default::default()
                })
            })
            .collect();
        evaluate_batch(&inputs, &EvalConfig::default()).unwrap()
    }

    #[test]
    fn series_has_one_row_per_bin() {
        let text = series_csv(&batch(), "lateral").unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("bin,magnitude,frames,psnr.full,ssim.full"));
        assert_eq!(lines[1], "near,0.5,2,inf,1");
    }

    #[test]
    fn emit_is_deterministic() {
        let r = batch();
        let d = apply_gate(&r, Baseline::Report(&r), &GateConfig {
            criteria: vec![crate::report::Criterion {
                metric: "ssim.full".into(),
                baseline_source: crate::report::BaselineSource::PairedGroundTruth,
                comparison: crate::report::Comparison::RelativeDrop,
                threshold: 0.1,
            }],
            ..GateConfig::default()
        })
        .unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = emit_report(&r, Some(&d), a.path()).unwrap();
        let fb = emit_report(&r, Some(&d), b.path()).unwrap();
        assert_eq!(fa.len(), 5);
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
        let summary = fs::read_to_string(a.path().join("summary.txt")).unwrap();
        assert!(summary.contains("overall: PASS"));
        assert!(summary.contains("max relative drop: 0"));
    }

    #[test]
    fn frames_csv_columns() {
        let text = frames_csv(&batch()).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rdr.headers().unwrap().len(), 6);
        assert_eq!(rdr.records().count(), 6);
    }
}
