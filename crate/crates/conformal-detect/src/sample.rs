//! Detections, ground truth, reader opinions, and the per-slice sample.

use crate::alphabet::{Alphabet, ClassLabel, Polarity};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Default ceiling on detections per sample. Detectors that emit a dense
/// candidate list (anchor grids and the like) stay well below this in
/// practice; anything above it is treated as malformed input.
pub const DEFAULT_MAX_DETECTIONS: usize = 10_000;

/// One detector output: a box, a class, and a confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub label: ClassLabel,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, label: ClassLabel, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidConfidence(confidence));
        }
        Ok(Detection {
            bbox,
            label,
            confidence,
        })
    }
}

/// Ground-truth verdict for one class on one slice. Absence never carries
/// boxes; presence usually carries one or more.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLabel {
    pub label: ClassLabel,
    pub polarity: Polarity,
    pub boxes: Vec<BBox>,
}

impl GroundTruthLabel {
    pub fn new(label: ClassLabel, polarity: Polarity, boxes: Vec<BBox>) -> Result<Self> {
        if polarity == Polarity::Absent && !boxes.is_empty() {
            return Err(Error::BoxesOnAbsentTruth {
                class: format!("#{}", label.index()),
            });
        }
        Ok(GroundTruthLabel {
            label,
            polarity,
            boxes,
        })
    }

    pub fn present(label: ClassLabel, boxes: Vec<BBox>) -> Self {
        GroundTruthLabel {
            label,
            polarity: Polarity::Present,
            boxes,
        }
    }

    pub fn absent(label: ClassLabel) -> Self {
        GroundTruthLabel {
            label,
            polarity: Polarity::Absent,
            boxes: Vec::new(),
        }
    }
}

/// One reader's presence/absence call for every class of the alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ReaderOpinion {
    pub reader_id: String,
    labels: Vec<Polarity>,
}

impl ReaderOpinion {
    /// `labels` must rate every class of the alphabet, in alphabet order.
    pub fn new(reader_id: impl Into<String>, labels: Vec<Polarity>, alphabet: &Alphabet) -> Result<Self> {
        let reader_id = reader_id.into();
        if labels.len() != alphabet.len() {
            return Err(Error::ReaderCoverage {
                slice_id: String::new(),
                reader_id,
            });
        }
        Ok(ReaderOpinion { reader_id, labels })
    }

    pub fn polarity(&self, label: ClassLabel) -> Polarity {
        self.labels[label.index()]
    }

    pub fn labels(&self) -> &[Polarity] {
        &self.labels
    }
}

/// Everything known about one slice: identifiers for grouping, the raw
/// detections, and (optionally) ground truth and reader opinions.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub slice_id: String,
    pub series_id: String,
    pub patient_id: String,
    pub detections: Vec<Detection>,
    pub ground_truth: Option<Vec<GroundTruthLabel>>,
    pub readers: Option<Vec<ReaderOpinion>>,
}

impl Sample {
    pub fn new(
        slice_id: impl Into<String>,
        series_id: impl Into<String>,
        patient_id: impl Into<String>,
    ) -> Self {
        Sample {
            slice_id: slice_id.into(),
            series_id: series_id.into(),
            patient_id: patient_id.into(),
            detections: Vec::new(),
            ground_truth: None,
            readers: None,
        }
    }

    /// Ground-truth entry for a class, if any.
    pub fn truth_for(&self, label: ClassLabel) -> Option<&GroundTruthLabel> {
        self.ground_truth
            .as_ref()?
            .iter()
            .find(|g| g.label == label)
    }

    /// Checks the structural invariants that constructors cannot enforce:
    /// detection count, one truth entry per class, and full reader coverage.
    pub fn validate(&self, alphabet: &Alphabet, max_detections: usize) -> Result<()> {
        if self.detections.len() > max_detections {
            return Err(Error::TooManyDetections {
                slice_id: self.slice_id.clone(),
                count: self.detections.len(),
                max: max_detections,
            });
        }
        if let Some(truth) = &self.ground_truth {
            let mut seen = vec![false; alphabet.len()];
            for g in truth {
                let i = g.label.index();
                if i >= seen.len() || seen[i] {
                    return Err(Error::DuplicateClassTruth {
                        slice_id: self.slice_id.clone(),
                        class: alphabet
                            .names()
                            .get(i)
                            .cloned()
                            .unwrap_or_else(|| format!("#{i}")),
                    });
                }
                seen[i] = true;
            }
        }
        if let Some(readers) = &self.readers {
            for r in readers {
                if r.labels().len() != alphabet.len() {
                    return Err(Error::ReaderCoverage {
                        slice_id: self.slice_id.clone(),
                        reader_id: r.reader_id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Index of the highest-confidence detection per class, ties broken by
/// earliest input order. The returned vector is indexed by class; entries are
/// indices into `detections`.
pub fn top_box_per_class(detections: &[Detection], alphabet: &Alphabet) -> Vec<Option<usize>> {
    let mut best: Vec<Option<usize>> = vec![None; alphabet.len()];
    for (i, det) in detections.iter().enumerate() {
        let Some(slot) = best.get_mut(det.label.index()) else {
            continue;
        };
        match slot {
            Some(j) if detections[*j].confidence >= det.confidence => {}
            _ => *slot = Some(i),
        }
    }
    best
}
