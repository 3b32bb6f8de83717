//! Per-class average precision over asserted boxes.
//!
//! Each presence assertion contributes one ranked candidate box (the
//! cluster's condensed box for the class, scored by its detection
//! confidence). Candidates are matched greedily in rank order to unmatched
//! ground-truth boxes of the same class on the same image, and the AP of a
//! class is the area under its precision-recall curve with all-points
//! interpolation (precision replaced by the running maximum to its right).

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Polarity};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::inference::SampleResult;
use crate::sample::GroundTruthLabel;

/// Average precision per class plus the mean over evaluable classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    /// One slot per class; `None` when the class has no ground-truth box.
    pub per_class: Vec<Option<f64>>,
    /// Mean over classes with at least one ground-truth box.
    pub mean: Option<f64>,
}

struct RankedBox<'a> {
    sample: usize,
    confidence: f64,
    bbox: Option<&'a BBox>,
}

/// Computes AP per class and its mean at the `match_iou` overlap threshold.
///
/// `results[i]` is scored against `truths[i]`; classes without ground-truth
/// boxes are excluded from the mean rather than scored zero.
pub fn mean_average_precision(
    results: &[SampleResult],
    truths: &[Vec<GroundTruthLabel>],
    alphabet: &Alphabet,
    match_iou: f64,
) -> Result<ApReport> {
    if !(0.0..=1.0).contains(&match_iou) {
        return Err(Error::InvalidThreshold {
            name: "match_iou",
            value: match_iou,
        });
    }
    if results.len() != truths.len() {
        return Err(Error::InvalidInput(format!(
            "{} results but {} truth entries",
            results.len(),
            truths.len()
        )));
    }
    let k = alphabet.len();
    for truth in truths {
        for t in truth {
            if t.label.index() >= k {
                return Err(Error::UnknownClass {
                    name: format!("#{}", t.label.index()),
                });
            }
        }
    }

    let per_class: Vec<Option<f64>> = alphabet
        .labels()
        .map(|label| {
            let mut candidates: Vec<RankedBox<'_>> = Vec::new();
            for (i, result) in results.iter().enumerate() {
                for cluster in &result.clusters {
                    for entry in &cluster.prediction_set {
                        if entry.label == label && entry.polarity == Polarity::Present {
                            candidates.push(RankedBox {
                                sample: i,
                                confidence: entry.source_confidence,
                                bbox: cluster.member(label).map(|d| &d.bbox),
                            });
                        }
                    }
                }
            }
            // Stable sort: equal confidences keep input (sample, cluster)
            // order, so ranking is deterministic.
            candidates.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));

            let gt: Vec<Vec<&BBox>> = truths
                .iter()
                .map(|truth| {
                    truth
                        .iter()
                        .filter(|t| t.label == label && t.polarity == Polarity::Present)
                        .flat_map(|t| t.boxes.iter())
                        .collect()
                })
                .collect();
            let total_gt: usize = gt.iter().map(Vec::len).sum();
            if total_gt == 0 {
                return None;
            }
            Some(average_precision(&candidates, &gt, total_gt, match_iou))
        })
        .collect();

    let evaluable: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = (!evaluable.is_empty())
        .then(|| evaluable.iter().sum::<f64>() / evaluable.len() as f64);
    Ok(ApReport { per_class, mean })
}

fn average_precision(
    candidates: &[RankedBox<'_>],
    gt: &[Vec<&BBox>],
    total_gt: usize,
    match_iou: f64,
) -> f64 {
    let mut matched: Vec<Vec<bool>> = gt.iter().map(|g| vec![false; g.len()]).collect();
    let mut precisions = Vec::with_capacity(candidates.len());
    let mut recalls = Vec::with_capacity(candidates.len());
    let mut tp = 0usize;
    for (rank, c) in candidates.iter().enumerate() {
        let hit = c.bbox.and_then(|b| {
            gt[c.sample]
                .iter()
                .enumerate()
                .filter(|&(j, g)| !matched[c.sample][j] && b.iou(g) >= match_iou)
                .max_by(|(_, x), (_, y)| b.iou(x).total_cmp(&b.iou(y)))
                .map(|(j, _)| j)
        });
        if let Some(j) = hit {
            matched[c.sample][j] = true;
            tp += 1;
        }
        precisions.push(tp as f64 / (rank + 1) as f64);
        recalls.push(tp as f64 / total_gt as f64);
    }

    // All-points interpolation: precision at each rank becomes the maximum
    // precision at that rank or any later one.
    let mut envelope = precisions;
    for i in (1..envelope.len()).rev() {
        if envelope[i] > envelope[i - 1] {
            envelope[i - 1] = envelope[i];
        }
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (i, &r) in recalls.iter().enumerate() {
        if r > prev_recall {
            area += (r - prev_recall) * envelope[i];
            prev_recall = r;
        }
    }
    area
}
