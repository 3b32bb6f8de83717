//! Output formats for inference results and evaluation reports.
//!
//! Results are JSON lines, one per slice, exposing every cluster with its
//! delimiter, condensed members, and scored prediction set. Reports are CSV,
//! one row per `(iou, conformal, regime)` combination; undefined metrics
//! (division by zero, counts a regime does not track) are empty cells.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Polarity};
use crate::error::Result;
use crate::geometry::BBox;
use crate::inference::{Cluster, SampleResult};
use crate::metrics::EvaluationReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BoxRecord {
    class: String,
    #[serde(rename = "box")]
    bbox: BBox,
    conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PredictionRecord {
    class: String,
    polarity: Polarity,
    score: f64,
    conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClusterRecord {
    delimiter: BoxRecord,
    /// Condensed members in class order; classes without a member are
    /// omitted rather than written as nulls.
    members: Vec<BoxRecord>,
    prediction_set: Vec<PredictionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResultRecord {
    slice_id: String,
    iou_threshold: f64,
    conformal_threshold: f64,
    challenging: bool,
    clusters: Vec<ClusterRecord>,
}

fn cluster_record(cluster: &Cluster, alphabet: &Alphabet) -> ClusterRecord {
    let as_box = |d: &crate::sample::Detection| BoxRecord {
        class: alphabet.name(d.label).to_string(),
        bbox: d.bbox.clone(),
        conf: d.confidence,
    };
    ClusterRecord {
        delimiter: as_box(&cluster.delimiter),
        members: cluster.members.iter().flatten().map(as_box).collect(),
        prediction_set: cluster
            .prediction_set
            .iter()
            .map(|e| PredictionRecord {
                class: alphabet.name(e.label).to_string(),
                polarity: e.polarity,
                score: e.score,
                conf: e.source_confidence,
            })
            .collect(),
    }
}

/// Writes per-slice results as JSON lines.
pub fn write_results(path: &Path, results: &[SampleResult], alphabet: &Alphabet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for result in results {
        let record = ResultRecord {
            slice_id: result.slice_id.clone(),
            iou_threshold: result.iou_threshold,
            conformal_threshold: result.conformal_threshold,
            challenging: result.challenging,
            clusters: result
                .clusters
                .iter()
                .map(|c| cluster_record(c, alphabet))
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn optional<T: std::fmt::Display>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes evaluation reports as CSV, one row per report.
pub fn write_report_csv<'a>(
    path: &Path,
    reports: impl IntoIterator<Item = &'a EvaluationReport>,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record([
        "iou_threshold",
        "conformal_threshold",
        "regime",
        "tp",
        "fp",
        "tn",
        "fn",
        "sensitivity",
        "specificity",
        "ppv",
        "npv",
        "f1",
    ])?;
    for r in reports {
        writer.write_record([
            r.iou_threshold.to_string(),
            r.conformal_threshold.to_string(),
            r.regime.to_string(),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            optional(r.counts.tn),
            optional(r.counts.fn_),
            optional(r.metrics.sensitivity),
            optional(r.metrics.specificity),
            optional(r.metrics.ppv),
            optional(r.metrics.npv),
            optional(r.metrics.f1),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
