//! The dataset wire format: one JSON object per line, one line per slice.
//!
//! ```json
//! {"slice_id": "s-0001", "series_id": "r-1", "patient_id": "p-1",
//!  "detections": [{"class": "IPH", "box": [10.0, 10.0, 90.0, 80.0], "conf": 0.92}],
//!  "truth": [{"class": "IPH", "polarity": "present", "boxes": [[12.0, 8.0, 88.0, 79.0]]}],
//!  "readers": [{"reader_id": "rad-1", "labels": {"IPH": "present", "IVH": "absent"}}]}
//! ```
//!
//! `series_id`, `patient_id`, `truth`, and `readers` are optional. Unknown
//! top-level fields are preserved verbatim through read/write round trips,
//! so upstream annotations survive subsetting.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Polarity};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::sample::{Detection, GroundTruthLabel, ReaderOpinion, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub class: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub class: String,
    pub polarity: Polarity,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderRecord {
    pub reader_id: String,
    pub labels: BTreeMap<String, Polarity>,
}

/// One dataset line as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub slice_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub series_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub patient_id: String,
    pub detections: Vec<DetectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<TruthRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readers: Option<Vec<ReaderRecord>>,
    /// Fields this toolkit does not interpret, carried through untouched.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// A parsed sample paired with its original record, so writers can reproduce
/// fields the domain model does not carry.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub sample: Sample,
    pub record: SampleRecord,
}

impl DatasetEntry {
    /// Wraps a freshly generated sample (no extra fields to preserve).
    pub fn from_sample(sample: Sample, alphabet: &Alphabet) -> DatasetEntry {
        let record = record_from_sample(&sample, alphabet);
        DatasetEntry { sample, record }
    }
}

fn record_from_sample(sample: &Sample, alphabet: &Alphabet) -> SampleRecord {
    SampleRecord {
        slice_id: sample.slice_id.clone(),
        series_id: sample.series_id.clone(),
        patient_id: sample.patient_id.clone(),
        detections: sample
            .detections
            .iter()
            .map(|d| DetectionRecord {
                class: alphabet.name(d.label).to_string(),
                bbox: d.bbox.clone(),
                conf: d.confidence,
            })
            .collect(),
        truth: sample.ground_truth.as_ref().map(|truth| {
            truth
                .iter()
                .map(|t| TruthRecord {
                    class: alphabet.name(t.label).to_string(),
                    polarity: t.polarity,
                    boxes: t.boxes.clone(),
                })
                .collect()
        }),
        readers: sample.readers.as_ref().map(|readers| {
            readers
                .iter()
                .map(|r| ReaderRecord {
                    reader_id: r.reader_id.clone(),
                    labels: alphabet
                        .names()
                        .iter()
                        .cloned()
                        .zip(r.labels().iter().copied())
                        .collect(),
                })
                .collect()
        }),
        extra: BTreeMap::new(),
    }
}

fn sample_from_record(record: &SampleRecord, alphabet: &Alphabet) -> Result<Sample> {
    let mut sample = Sample::new(
        record.slice_id.clone(),
        record.series_id.clone(),
        record.patient_id.clone(),
    );
    for d in &record.detections {
        sample.detections.push(Detection::new(
            d.bbox.clone(),
            alphabet.require(&d.class)?,
            d.conf,
        )?);
    }
    if let Some(truth) = &record.truth {
        sample.ground_truth = Some(
            truth
                .iter()
                .map(|t| {
                    GroundTruthLabel::new(alphabet.require(&t.class)?, t.polarity, t.boxes.clone())
                })
                .collect::<Result<_>>()?,
        );
    }
    if let Some(readers) = &record.readers {
        sample.readers = Some(
            readers
                .iter()
                .map(|r| {
                    if r.labels.len() != alphabet.len() {
                        return Err(Error::ReaderCoverage {
                            slice_id: record.slice_id.clone(),
                            reader_id: r.reader_id.clone(),
                        });
                    }
                    let labels = alphabet
                        .names()
                        .iter()
                        .map(|name| {
                            r.labels.get(name).copied().ok_or_else(|| Error::ReaderCoverage {
                                slice_id: record.slice_id.clone(),
                                reader_id: r.reader_id.clone(),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    ReaderOpinion::new(r.reader_id.clone(), labels, alphabet)
                })
                .collect::<Result<_>>()?,
        );
    }
    sample.validate(alphabet, crate::sample::DEFAULT_MAX_DETECTIONS)?;
    Ok(sample)
}

/// Reads a JSON-lines dataset. Any per-line failure — bad JSON, an unknown
/// class, an out-of-range confidence — is reported with its line number;
/// a repeated `slice_id` across lines is rejected.
pub fn read_dataset(path: &Path, alphabet: &Alphabet) -> Result<Vec<DatasetEntry>> {
    let shown = path.display().to_string();
    let file = File::open(path)?;
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedLine {
            path: shown.clone(),
            line: index + 1,
            message,
        };
        let record: SampleRecord =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let sample = sample_from_record(&record, alphabet).map_err(|e| malformed(e.to_string()))?;
        if !seen.insert(sample.slice_id.clone()) {
            return Err(Error::DuplicateSliceId {
                slice_id: sample.slice_id,
            });
        }
        entries.push(DatasetEntry { sample, record });
    }
    Ok(entries)
}

/// Writes entries as JSON lines, preserving any uninterpreted fields.
pub fn write_dataset(path: &Path, entries: &[DatasetEntry]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for entry in entries {
        serde_json::to_writer(&mut out, &entry.record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
