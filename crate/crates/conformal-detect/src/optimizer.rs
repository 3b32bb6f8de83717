//! Exhaustive threshold-grid sweep and operating-point selection.
//!
//! The sweep scores every `(iou_threshold, conformal_threshold)` pair of a
//! [`ThresholdGrid`] over a ground-truthed dataset, producing one
//! [`GridCell`] per pair with an [`EvaluationReport`] per requested regime.
//! Clusters depend only on the IoU threshold, so they are built once per
//! grid row and re-scored across the conformal axis; rows are independent
//! and evaluated in parallel, with a fixed-order final aggregation so two
//! sweeps over the same inputs are identical.
//!
//! Two selectors pick an operating point from the finished grid:
//!
//! * [`select_by_auroc`] — for each IoU row, sweep the conformal axis to
//!   trace an ROC curve and compute its area; the row with the largest area
//!   wins, and within it the cell maximizing Youden's J (`tpr − fpr`). Ties
//!   prefer the smallest IoU, then the smallest conformal threshold.
//! * [`select_by_ppv`] — argmax of positive predictive value over all
//!   cells, skipping cells with no positive assertions; ties prefer more
//!   true positives, then the smallest thresholds.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationModel;
use crate::error::{Error, Result};
use crate::inference::{build_clusters, conformalize, flag_challenging, SampleResult};
use crate::metrics::{score_dataset, EvaluationReport, MatchSpec, Regime};
use crate::metrics::roc::auroc;
use crate::sample::{GroundTruthLabel, Sample};

/// The cartesian grid of threshold pairs to score.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    iou_values: Vec<f64>,
    conformal_values: Vec<f64>,
}

fn validate_axis(name: &'static str, values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput(format!("{name} axis is empty")));
    }
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidThreshold { name, value: v });
        }
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "{name} axis must be strictly ascending"
        )));
    }
    // Normalize -0.0 so threshold values compare and group bitwise.
    Ok(values.iter().map(|&v| if v == 0.0 { 0.0 } else { v }).collect())
}

impl ThresholdGrid {
    /// Builds a grid from two strictly ascending axes of values in `[0, 1]`.
    pub fn new(iou_values: Vec<f64>, conformal_values: Vec<f64>) -> Result<ThresholdGrid> {
        Ok(ThresholdGrid {
            iou_values: validate_axis("iou_threshold", &iou_values)?,
            conformal_values: validate_axis("conformal_threshold", &conformal_values)?,
        })
    }

    pub fn iou_values(&self) -> &[f64] {
        &self.iou_values
    }

    pub fn conformal_values(&self) -> &[f64] {
        &self.conformal_values
    }

    /// Number of cells the sweep will produce.
    pub fn len(&self) -> usize {
        self.iou_values.len() * self.conformal_values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for ThresholdGrid {
    /// Both axes run 0.00 to 1.00 in steps of 0.05: 21 × 21 = 441 pairs.
    /// Values are generated from integer numerators so no drift accumulates.
    fn default() -> ThresholdGrid {
        let axis: Vec<f64> = (0..=20).map(|k| (k * 5) as f64 / 100.0).collect();
        ThresholdGrid::new(axis.clone(), axis).expect("default grid is valid")
    }
}

/// Scores for one threshold pair, one report per regime.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub iou_threshold: f64,
    pub conformal_threshold: f64,
    pub reports: BTreeMap<Regime, EvaluationReport>,
}

/// Scores every grid pair over `samples`, which must all carry ground truth.
pub fn sweep(
    samples: &[Sample],
    model: &CalibrationModel,
    grid: &ThresholdGrid,
    specs: &[MatchSpec],
) -> Result<Vec<GridCell>> {
    let mut regimes = BTreeSet::new();
    for spec in specs {
        if !regimes.insert(spec.regime) {
            return Err(Error::InvalidInput(format!(
                "regime {} requested twice",
                spec.regime
            )));
        }
    }
    let truths: Vec<Vec<GroundTruthLabel>> = samples
        .iter()
        .map(|s| {
            s.ground_truth.clone().ok_or_else(|| Error::MissingGroundTruth {
                slice_id: s.slice_id.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let alphabet = model.alphabet();

    let rows: Vec<Vec<GridCell>> = grid
        .iou_values()
        .par_iter()
        .map(|&iou| -> Result<Vec<GridCell>> {
            let wrap = |conformal: f64| {
                move |e: Error| Error::SweepCell {
                    iou,
                    conformal,
                    source: Box::new(e),
                }
            };
            // Clusters do not depend on the conformal threshold: build them
            // once for the whole row.
            let base: Vec<_> = samples
                .iter()
                .map(|s| build_clusters(&s.detections, alphabet, iou))
                .collect::<Result<_>>()
                .map_err(wrap(grid.conformal_values()[0]))?;
            let mut row = Vec::with_capacity(grid.conformal_values().len());
            for &t in grid.conformal_values() {
                let mut results = Vec::with_capacity(samples.len());
                for (sample, clusters) in samples.iter().zip(&base) {
                    let scored: Vec<_> = clusters
                        .iter()
                        .map(|c| conformalize(c, model, t))
                        .collect::<Result<_>>()
                        .map_err(wrap(t))?;
                    results.push(SampleResult {
                        slice_id: sample.slice_id.clone(),
                        challenging: flag_challenging(&scored),
                        iou_threshold: iou,
                        conformal_threshold: t,
                        clusters: scored,
                    });
                }
                let mut reports = BTreeMap::new();
                for spec in specs {
                    let counts =
                        score_dataset(&results, &truths, alphabet, *spec).map_err(wrap(t))?;
                    reports.insert(spec.regime, EvaluationReport::new(spec.regime, iou, t, counts));
                }
                row.push(GridCell {
                    iou_threshold: iou,
                    conformal_threshold: t,
                    reports,
                });
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// A chosen operating point and the criterion value that selected it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub regime: Regime,
    pub iou_threshold: f64,
    pub conformal_threshold: f64,
    /// The selected ROC area or positive predictive value.
    pub value: f64,
}

/// Bit key for grouping exact threshold values; non-negative floats order
/// the same way as their bit patterns.
fn bits(v: f64) -> u64 {
    if v == 0.0 { 0.0f64 } else { v }.to_bits()
}

/// Picks the IoU row with the largest ROC area over the conformal axis,
/// then the cell on it with maximal Youden's J.
pub fn select_by_auroc(cells: &[GridCell], regime: Regime) -> Result<Selection> {
    if matches!(regime, Regime::MatrixC | Regime::ExtExactClassification) {
        return Err(Error::InvalidRegime {
            regime: regime.to_string(),
            reason: "negatives are undefined, so no ROC curve exists".into(),
        });
    }
    let mut rows: BTreeMap<u64, Vec<&GridCell>> = BTreeMap::new();
    for cell in cells {
        rows.entry(bits(cell.iou_threshold)).or_default().push(cell);
    }
    let mut best: Option<(f64, u64)> = None;
    for (&key, row) in &rows {
        let points: Vec<(f64, f64)> = row
            .iter()
            .filter_map(|cell| {
                let counts = cell.reports.get(&regime)?.counts;
                Some((counts.fpr()?, counts.tpr()?))
            })
            .collect();
        let area = auroc(&points)?.area;
        // Strict improvement keeps the earliest (smallest) iou row on ties.
        if best.is_none_or(|(b, _)| area > b) {
            best = Some((area, key));
        }
    }
    let (value, row_key) = best.ok_or(Error::NoSelection)?;

    let mut row: Vec<&GridCell> = rows.remove(&row_key).unwrap_or_default();
    row.sort_by_key(|cell| bits(cell.conformal_threshold));
    let mut best_cell: Option<(f64, &GridCell)> = None;
    for cell in row {
        let Some(j) = cell
            .reports
            .get(&regime)
            .and_then(|r| r.counts.youden_j())
        else {
            continue;
        };
        if best_cell.is_none_or(|(b, _)| j > b) {
            best_cell = Some((j, cell));
        }
    }
    let (_, cell) = best_cell.ok_or(Error::NoSelection)?;
    Ok(Selection {
        regime,
        iou_threshold: cell.iou_threshold,
        conformal_threshold: cell.conformal_threshold,
        value,
    })
}

/// Picks the cell with the highest positive predictive value; cells with no
/// positive assertions are skipped.
pub fn select_by_ppv(cells: &[GridCell], regime: Regime) -> Result<Selection> {
    let mut ordered: Vec<&GridCell> = cells.iter().collect();
    ordered.sort_by_key(|c| (bits(c.iou_threshold), bits(c.conformal_threshold)));
    let mut best: Option<(f64, u64, &GridCell)> = None;
    for cell in ordered {
        let Some(report) = cell.reports.get(&regime) else {
            continue;
        };
        let Some(ppv) = report.metrics.ppv else {
            continue;
        };
        let tp = report.counts.tp;
        let improves = match best {
            None => true,
            Some((best_ppv, best_tp, _)) => {
                ppv > best_ppv || (ppv == best_ppv && tp > best_tp)
            }
        };
        if improves {
            best = Some((ppv, tp, cell));
        }
    }
    let (value, _, cell) = best.ok_or(Error::NoSelection)?;
    Ok(Selection {
        regime,
        iou_threshold: cell.iou_threshold,
        conformal_threshold: cell.conformal_threshold,
        value,
    })
}
