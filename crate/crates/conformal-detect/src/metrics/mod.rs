//! Confusion-matrix regimes, derived metrics, ROC area, average precision,
//! and a two-proportion significance test.
//!
//! Evaluation is regime-parameterized: the same prediction sets can be
//! scored per assertion with or without localization, per cluster, per
//! image-class pair, or per image. The five built-in regimes are expressed
//! through [`MatchSpec`], so a different reading of any regime is a
//! configuration change rather than new code.
//!
//! | regime | counting unit | condition for a true positive |
//! |---|---|---|
//! | `MatrixA` | presence assertion | class present on the image and the asserted box overlaps a truth box of that class at the match threshold |
//! | `MatrixB` | presence assertion | class present on the image, localization ignored |
//! | `MatrixC` | cluster | the cluster asserts exactly one class present, that class is present, and its box overlaps a truth box at the match threshold; clusters asserting nothing present are not counted, and negatives are undefined |
//! | `ExtClassification` | image-class pair | class asserted somewhere on the image and present in truth |
//! | `ExtExactClassification` | image | the set of classes asserted present equals the true class set; an empty prediction against a non-empty truth counts nothing (false negatives undefined) |
//!
//! In `MatrixA` and `MatrixB`, a class that is present but never credited
//! with a matching assertion adds one false negative, and a class that is
//! absent and never asserted adds one true negative. The match threshold is
//! the IoU threshold recorded on the [`SampleResult`] being scored.

pub mod average_precision;
pub mod roc;
pub mod stats;

pub use average_precision::{mean_average_precision, ApReport};
pub use roc::{auroc, RocArea};
pub use stats::two_proportion_test;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Polarity};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::inference::SampleResult;
use crate::sample::GroundTruthLabel;

/// The five built-in evaluation regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    MatrixA,
    MatrixB,
    MatrixC,
    ExtClassification,
    ExtExactClassification,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::MatrixA,
        Regime::MatrixB,
        Regime::MatrixC,
        Regime::ExtClassification,
        Regime::ExtExactClassification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::MatrixA => "matrix-a",
            Regime::MatrixB => "matrix-b",
            Regime::MatrixC => "matrix-c",
            Regime::ExtClassification => "ext-classification",
            Regime::ExtExactClassification => "ext-exact-classification",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidRegime {
                regime: s.to_string(),
                reason: format!(
                    "expected one of {}",
                    Regime::ALL.map(|r| r.as_str()).join(", ")
                ),
            })
    }
}

/// What one confusion count is counted over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountingUnit {
    /// Each presence assertion (or, with exact sets, each cluster).
    ClassInstance,
    /// Each (image, class) pair, at most one count apiece.
    SliceClass,
    /// Each image as a whole.
    Slice,
}

/// Declarative description of a regime's matching rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpec {
    pub regime: Regime,
    /// Positive credit requires box overlap at the match threshold.
    pub match_iou_required: bool,
    /// Positive credit requires the asserted class to be the true class.
    pub class_must_match: bool,
    /// Positive credit requires the whole asserted set to be exactly right.
    pub exact_set_required: bool,
    pub counting_unit: CountingUnit,
}

impl MatchSpec {
    /// The built-in reading of each regime.
    pub fn default_for(regime: Regime) -> MatchSpec {
        match regime {
            Regime::MatrixA => MatchSpec {
                regime,
                match_iou_required: true,
                class_must_match: true,
                exact_set_required: false,
                counting_unit: CountingUnit::ClassInstance,
            },
            Regime::MatrixB => MatchSpec {
                regime,
                match_iou_required: false,
                class_must_match: true,
                exact_set_required: false,
                counting_unit: CountingUnit::ClassInstance,
            },
            Regime::MatrixC => MatchSpec {
                regime,
                match_iou_required: true,
                class_must_match: true,
                exact_set_required: true,
                counting_unit: CountingUnit::ClassInstance,
            },
            Regime::ExtClassification => MatchSpec {
                regime,
                match_iou_required: false,
                class_must_match: true,
                exact_set_required: false,
                counting_unit: CountingUnit::SliceClass,
            },
            Regime::ExtExactClassification => MatchSpec {
                regime,
                match_iou_required: false,
                class_must_match: true,
                exact_set_required: true,
                counting_unit: CountingUnit::Slice,
            },
        }
    }
}

/// Raw confusion counts; `tn` and `fn` are absent in regimes that do not
/// define negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: Option<u64>,
    #[serde(rename = "fn")]
    pub fn_: Option<u64>,
}

fn merge(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x + y),
        _ => None,
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            tn: merge(self.tn, rhs.tn),
            fn_: merge(self.fn_, rhs.fn_),
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: ConfusionCounts) {
        *self = *self + rhs;
    }
}

fn ratio(num: u64, denom: u64) -> Option<f64> {
    (denom > 0).then(|| num as f64 / denom as f64)
}

impl ConfusionCounts {
    /// Counts with defined (zeroed) negatives, for regimes that track them.
    pub fn with_negatives() -> ConfusionCounts {
        ConfusionCounts {
            tn: Some(0),
            fn_: Some(0),
            ..ConfusionCounts::default()
        }
    }

    /// True-positive rate `tp / (tp + fn)`, when defined.
    pub fn tpr(&self) -> Option<f64> {
        self.fn_.and_then(|fn_| ratio(self.tp, self.tp + fn_))
    }

    /// False-positive rate `fp / (fp + tn)`, when defined.
    pub fn fpr(&self) -> Option<f64> {
        self.tn.and_then(|tn| ratio(self.fp, self.fp + tn))
    }

    /// Youden's J statistic `tpr - fpr`, when both rates are defined.
    pub fn youden_j(&self) -> Option<f64> {
        Some(self.tpr()? - self.fpr()?)
    }
}

/// Metrics derivable from confusion counts; each is absent whenever a count
/// it needs is undefined or its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DerivedMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
}

/// Computes every derivable metric from `counts`; absence encodes undefined,
/// so no division by zero can occur.
pub fn derive(counts: ConfusionCounts) -> DerivedMetrics {
    let ConfusionCounts { tp, fp, tn, fn_ } = counts;
    DerivedMetrics {
        sensitivity: counts.tpr(),
        specificity: tn.and_then(|tn| ratio(tn, tn + fp)),
        ppv: ratio(tp, tp + fp),
        npv: tn.and_then(|tn| fn_.and_then(|fn_| ratio(tn, tn + fn_))),
        f1: fn_.and_then(|fn_| ratio(2 * tp, 2 * tp + fp + fn_)),
    }
}

/// Confusion counts plus derived metrics for one regime at one threshold
/// pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub regime: Regime,
    pub iou_threshold: f64,
    pub conformal_threshold: f64,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: DerivedMetrics,
}

impl EvaluationReport {
    pub fn new(
        regime: Regime,
        iou_threshold: f64,
        conformal_threshold: f64,
        counts: ConfusionCounts,
    ) -> EvaluationReport {
        EvaluationReport {
            regime,
            iou_threshold,
            conformal_threshold,
            counts,
            metrics: derive(counts),
        }
    }
}

/// Per-class view of the truth for one sample.
struct TruthIndex<'a> {
    present: Vec<bool>,
    boxes: Vec<&'a [BBox]>,
}

impl<'a> TruthIndex<'a> {
    fn build(
        slice_id: &str,
        truth: &'a [GroundTruthLabel],
        alphabet: &Alphabet,
    ) -> Result<TruthIndex<'a>> {
        let k = alphabet.len();
        let mut present = vec![false; k];
        let mut boxes: Vec<&[BBox]> = vec![&[]; k];
        let mut seen = vec![false; k];
        for t in truth {
            let c = t.label.index();
            if c >= k {
                return Err(Error::UnknownClass {
                    name: format!("#{c}"),
                });
            }
            if seen[c] {
                return Err(Error::DuplicateClassTruth {
                    slice_id: slice_id.to_string(),
                    class: alphabet.name(t.label).to_string(),
                });
            }
            seen[c] = true;
            present[c] = t.polarity == Polarity::Present;
            boxes[c] = &t.boxes;
        }
        Ok(TruthIndex { present, boxes })
    }

    fn any_present(&self) -> bool {
        self.present.iter().any(|&p| p)
    }

    fn all_boxes(&self) -> impl Iterator<Item = &BBox> {
        self.boxes.iter().flat_map(|b| b.iter())
    }
}

fn box_matches<'a>(
    asserted: Option<&BBox>,
    mut candidates: impl Iterator<Item = &'a BBox>,
    thr: f64,
) -> bool {
    match asserted {
        Some(b) => candidates.any(|g| b.iou(g) >= thr),
        None => false,
    }
}

/// Whether one presence assertion earns positive credit under `spec`.
fn assertion_hits(
    spec: MatchSpec,
    truth: &TruthIndex<'_>,
    class: usize,
    asserted_box: Option<&BBox>,
    thr: f64,
) -> bool {
    let class_ok = if spec.class_must_match {
        truth.present[class]
    } else {
        truth.any_present()
    };
    if !class_ok {
        return false;
    }
    if !spec.match_iou_required {
        return true;
    }
    if spec.class_must_match {
        box_matches(asserted_box, truth.boxes[class].iter(), thr)
    } else {
        box_matches(asserted_box, truth.all_boxes(), thr)
    }
}

/// Scores one conformalized sample against its truth under `spec`.
///
/// Counts are additive over samples, so dataset totals are the sum of
/// per-sample calls.
pub fn score_sample(
    result: &SampleResult,
    truth: &[GroundTruthLabel],
    alphabet: &Alphabet,
    spec: MatchSpec,
) -> Result<ConfusionCounts> {
    let truth = TruthIndex::build(&result.slice_id, truth, alphabet)?;
    let k = alphabet.len();
    let thr = result.iou_threshold;

    if spec.exact_set_required && spec.counting_unit == CountingUnit::Slice {
        return Ok(score_exact_slice(result, &truth));
    }
    if spec.exact_set_required && spec.counting_unit == CountingUnit::ClassInstance {
        return Ok(score_exact_clusters(result, &truth, spec, thr));
    }

    // Walk every presence assertion once, remembering per class whether it
    // was asserted at all and whether some assertion earned credit.
    let mut asserted = vec![false; k];
    let mut hit = vec![false; k];
    let mut entry_tp = 0u64;
    let mut entry_fp = 0u64;
    for cluster in &result.clusters {
        for entry in &cluster.prediction_set {
            if entry.polarity != Polarity::Present {
                continue;
            }
            let c = entry.label.index();
            let asserted_box = cluster.member(entry.label).map(|d| &d.bbox);
            asserted[c] = true;
            if assertion_hits(spec, &truth, c, asserted_box, thr) {
                hit[c] = true;
                entry_tp += 1;
            } else {
                entry_fp += 1;
            }
        }
    }

    let mut counts = ConfusionCounts::with_negatives();
    match spec.counting_unit {
        CountingUnit::ClassInstance => {
            counts.tp = entry_tp;
            counts.fp = entry_fp;
            for c in 0..k {
                if truth.present[c] && !hit[c] {
                    counts.fn_ = merge(counts.fn_, Some(1));
                }
                if !truth.present[c] && !asserted[c] {
                    counts.tn = merge(counts.tn, Some(1));
                }
            }
        }
        CountingUnit::SliceClass => {
            for c in 0..k {
                match (truth.present[c], asserted[c], hit[c]) {
                    (true, _, true) => counts.tp += 1,
                    (true, _, false) => counts.fn_ = merge(counts.fn_, Some(1)),
                    (false, true, _) => counts.fp += 1,
                    (false, false, _) => counts.tn = merge(counts.tn, Some(1)),
                }
            }
        }
        CountingUnit::Slice => {
            let any_asserted = asserted.iter().any(|&a| a);
            let any_hit = hit.iter().any(|&h| h);
            match (truth.any_present(), any_asserted, any_hit) {
                (true, _, true) => counts.tp += 1,
                (true, _, false) => counts.fn_ = merge(counts.fn_, Some(1)),
                (false, true, _) => counts.fp += 1,
                (false, false, _) => counts.tn = merge(counts.tn, Some(1)),
            }
        }
    }
    Ok(counts)
}

/// Cluster-level exact scoring: a cluster asserting exactly one class earns
/// a true positive when that class is right (and localized, if required);
/// any other non-empty presence assertion is a false positive. Negatives are
/// undefined.
fn score_exact_clusters(
    result: &SampleResult,
    truth: &TruthIndex<'_>,
    spec: MatchSpec,
    thr: f64,
) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for cluster in &result.clusters {
        let present: Vec<_> = cluster
            .prediction_set
            .iter()
            .filter(|e| e.polarity == Polarity::Present)
            .collect();
        let [single] = present.as_slice() else {
            if !present.is_empty() {
                counts.fp += 1;
            }
            continue;
        };
        let c = single.label.index();
        let asserted_box = cluster.member(single.label).map(|d| &d.bbox);
        let localized =
            !spec.match_iou_required || box_matches(asserted_box, truth.boxes[c].iter(), thr);
        if truth.present[c] && localized {
            counts.tp += 1;
        } else {
            counts.fp += 1;
        }
    }
    counts
}

/// Image-level exact scoring: the set of classes asserted present must equal
/// the true class set. An empty prediction against a non-empty truth counts
/// nothing, so false negatives are undefined.
fn score_exact_slice(result: &SampleResult, truth: &TruthIndex<'_>) -> ConfusionCounts {
    let asserted: BTreeSet<usize> = result
        .clusters
        .iter()
        .flat_map(|c| c.prediction_set.iter())
        .filter(|e| e.polarity == Polarity::Present)
        .map(|e| e.label.index())
        .collect();
    let actual: BTreeSet<usize> = truth
        .present
        .iter()
        .enumerate()
        .filter_map(|(c, &p)| p.then_some(c))
        .collect();
    let mut counts = ConfusionCounts {
        tn: Some(0),
        fn_: None,
        ..ConfusionCounts::default()
    };
    if asserted == actual {
        if actual.is_empty() {
            counts.tn = Some(1);
        } else {
            counts.tp += 1;
        }
    } else if !asserted.is_empty() {
        counts.fp += 1;
    }
    counts
}

/// Sums [`score_sample`] over aligned results and truths.
pub fn score_dataset(
    results: &[SampleResult],
    truths: &[Vec<GroundTruthLabel>],
    alphabet: &Alphabet,
    spec: MatchSpec,
) -> Result<ConfusionCounts> {
    if results.len() != truths.len() {
        return Err(Error::InvalidInput(format!(
            "{} results but {} truth entries",
            results.len(),
            truths.len()
        )));
    }
    let mut total = if spec.exact_set_required {
        if spec.counting_unit == CountingUnit::Slice {
            ConfusionCounts {
                tn: Some(0),
                fn_: None,
                ..ConfusionCounts::default()
            }
        } else {
            ConfusionCounts::default()
        }
    } else {
        ConfusionCounts::with_negatives()
    };
    for (result, truth) in results.iter().zip(truths) {
        total += score_sample(result, truth, alphabet, spec)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::ClassLabel;
    use crate::inference::{Cluster, PredictionSetEntry};
    use crate::sample::Detection;
    use proptest::prelude::*;

    fn label(a: &Alphabet, name: &str) -> ClassLabel {
        a.require(name).unwrap()
    }

    fn cluster(a: &Alphabet, members: &[(&str, f64, [f64; 4])], asserted: &[&str]) -> Cluster {
        let mut slots: Vec<Option<Detection>> = vec![None; a.len()];
        let mut delimiter: Option<Detection> = None;
        for (name, conf, b) in members {
            let d = Detection::new(
                BBox::new(b[0], b[1], b[2], b[3]).unwrap(),
                label(a, name),
                *conf,
            )
            .unwrap();
            if delimiter.is_none() {
                delimiter = Some(d.clone());
            }
            slots[d.label.index()] = Some(d.clone());
        }
        let prediction_set = asserted
            .iter()
            .map(|name| PredictionSetEntry {
                label: label(a, name),
                polarity: Polarity::Present,
                score: 1.0,
                source_confidence: slots[label(a, name).index()]
                    .as_ref()
                    .map_or(0.0, |d| d.confidence),
            })
            .collect();
        Cluster {
            delimiter: delimiter.expect("cluster needs at least one member"),
            members: slots,
            prediction_set,
        }
    }

    fn result(clusters: Vec<Cluster>) -> SampleResult {
        SampleResult {
            slice_id: "s".into(),
            challenging: false,
            iou_threshold: 0.5,
            conformal_threshold: 0.5,
            clusters,
        }
    }

    fn truth_present(a: &Alphabet, entries: &[(&str, &[[f64; 4]])]) -> Vec<GroundTruthLabel> {
        entries
            .iter()
            .map(|(name, boxes)| {
                GroundTruthLabel::new(
                    label(a, name),
                    Polarity::Present,
                    boxes
                        .iter()
                        .map(|b| BBox::new(b[0], b[1], b[2], b[3]).unwrap())
                        .collect(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn perfect_single_class_prediction_counts_one_tp_and_four_tn() {
        let a = Alphabet::default();
        let r = result(vec![cluster(
            &a,
            &[("IPH", 0.9, [0.0, 0.0, 10.0, 10.0])],
            &["IPH"],
        )]);
        let t = truth_present(&a, &[("IPH", &[[0.0, 0.0, 10.0, 10.0]])]);
        for regime in [Regime::MatrixA, Regime::MatrixB, Regime::ExtClassification] {
            let c = score_sample(&r, &t, &a, MatchSpec::default_for(regime)).unwrap();
            assert_eq!(
                (c.tp, c.fp, c.tn, c.fn_),
                (1, 0, Some(4), Some(0)),
                "{regime}"
            );
        }
        let c = score_sample(&r, &t, &a, MatchSpec::default_for(Regime::MatrixC)).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 0, None, None));
        let c = score_sample(
            &r,
            &t,
            &a,
            MatchSpec::default_for(Regime::ExtExactClassification),
        )
        .unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 0, Some(0), None));
    }

    #[test]
    fn total_miss_counts_one_fn_and_four_tn() {
        let a = Alphabet::default();
        let r = result(vec![]);
        let t = truth_present(&a, &[("SAH", &[[0.0, 0.0, 10.0, 10.0]])]);
        let c = score_sample(&r, &t, &a, MatchSpec::default_for(Regime::MatrixA)).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (0, 0, Some(4), Some(1)));
        // An empty prediction against a non-empty truth counts nothing at
        // the exact image level.
        let c = score_sample(
            &r,
            &t,
            &a,
            MatchSpec::default_for(Regime::ExtExactClassification),
        )
        .unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (0, 0, Some(0), None));
    }

    #[test]
    fn mislocalized_assertion_is_fp_under_a_but_tp_under_b() {
        let a = Alphabet::default();
        let r = result(vec![cluster(
            &a,
            &[("IPH", 0.9, [200.0, 200.0, 210.0, 210.0])],
            &["IPH"],
        )]);
        let t = truth_present(&a, &[("IPH", &[[0.0, 0.0, 10.0, 10.0]])]);
        let ca = score_sample(&r, &t, &a, MatchSpec::default_for(Regime::MatrixA)).unwrap();
        assert_eq!((ca.tp, ca.fp, ca.tn, ca.fn_), (0, 1, Some(4), Some(1)));
        let cb = score_sample(&r, &t, &a, MatchSpec::default_for(Regime::MatrixB)).unwrap();
        assert_eq!((cb.tp, cb.fp, cb.tn, cb.fn_), (1, 0, Some(4), Some(0)));
    }

    #[test]
    fn repeated_correct_assertions_count_per_entry_but_cap_per_class() {
        let a = Alphabet::default();
        let r = result(vec![
            cluster(&a, &[("IPH", 0.9, [0.0, 0.0, 10.0, 10.0])], &["IPH"]),
            cluster(&a, &[("IPH", 0.8, [0.0, 0.0, 10.0, 11.0])], &["IPH"]),
        ]);
        let t = truth_present(&a, &[("IPH", &[[0.0, 0.0, 10.0, 10.0]])]);
        let ca = score_sample(&r, &t, &a, MatchSpec::default_for(Regime::MatrixA)).unwrap();
        assert_eq!(ca.tp, 2);
        let ce =
            score_sample(&r, &t, &a, MatchSpec::default_for(Regime::ExtClassification)).unwrap();
        assert_eq!(ce.tp, 1);
    }

    #[test]
    fn cluster_level_exactness_requires_a_singleton() {
        let a = Alphabet::default();
        let t = truth_present(&a, &[("IPH", &[[0.0, 0.0, 10.0, 10.0]])]);
        let spec = MatchSpec::default_for(Regime::MatrixC);
        // Two classes asserted in one cluster: false positive.
        let two = result(vec![cluster(
            &a,
            &[
                ("IPH", 0.9, [0.0, 0.0, 10.0, 10.0]),
                ("IVH", 0.8, [0.0, 0.0, 10.0, 11.0]),
            ],
            &["IPH", "IVH"],
        )]);
        let c = score_sample(&two, &t, &a, spec).unwrap();
        assert_eq!((c.tp, c.fp), (0, 1));
        // A cluster asserting nothing present contributes nothing.
        let silent = result(vec![cluster(
            &a,
            &[("IPH", 0.9, [0.0, 0.0, 10.0, 10.0])],
            &[],
        )]);
        let c = score_sample(&silent, &t, &a, spec).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (0, 0, None, None));
        // Right class, wrong place: false positive.
        let misplaced = result(vec![cluster(
            &a,
            &[("IPH", 0.9, [300.0, 300.0, 310.0, 310.0])],
            &["IPH"],
        )]);
        let c = score_sample(&misplaced, &t, &a, spec).unwrap();
        assert_eq!((c.tp, c.fp), (0, 1));
    }

    #[test]
    fn image_level_exactness_compares_class_sets() {
        let a = Alphabet::default();
        let spec = MatchSpec::default_for(Regime::ExtExactClassification);
        let t = truth_present(
            &a,
            &[
                ("IPH", &[[0.0, 0.0, 10.0, 10.0]]),
                ("SAH", &[[50.0, 0.0, 60.0, 10.0]]),
            ],
        );
        // Both classes asserted, even mislocalized: the class sets match.
        let both = result(vec![
            cluster(&a, &[("IPH", 0.9, [500.0, 0.0, 510.0, 10.0])], &["IPH"]),
            cluster(&a, &[("SAH", 0.8, [600.0, 0.0, 610.0, 10.0])], &["SAH"]),
        ]);
        let c = score_sample(&both, &t, &a, spec).unwrap();
        assert_eq!((c.tp, c.fp, c.tn), (1, 0, Some(0)));
        // A subset is not exact.
        let one = result(vec![cluster(
            &a,
            &[("IPH", 0.9, [0.0, 0.0, 10.0, 10.0])],
            &["IPH"],
        )]);
        let c = score_sample(&one, &t, &a, spec).unwrap();
        assert_eq!((c.tp, c.fp), (0, 1));
        // Nothing asserted, nothing true: a true negative image.
        let c = score_sample(&result(vec![]), &[], &a, spec).unwrap();
        assert_eq!((c.tp, c.fp, c.tn), (0, 0, Some(1)));
    }

    #[test]
    fn duplicate_truth_class_is_rejected() {
        let a = Alphabet::default();
        let r = result(vec![]);
        let t = vec![
            GroundTruthLabel::new(label(&a, "IPH"), Polarity::Absent, vec![]).unwrap(),
            GroundTruthLabel::new(label(&a, "IPH"), Polarity::Absent, vec![]).unwrap(),
        ];
        assert!(matches!(
            score_sample(&r, &t, &a, MatchSpec::default_for(Regime::MatrixA)),
            Err(Error::DuplicateClassTruth { .. })
        ));
    }

    #[test]
    fn derived_metrics_match_hand_computed_ratios() {
        let counts = ConfusionCounts {
            tp: 1952,
            fp: 187,
            tn: Some(1358),
            fn_: Some(153),
        };
        let m = derive(counts);
        assert!((m.f1.unwrap() - 3904.0 / 4244.0).abs() < 1e-12);
        assert!((m.sensitivity.unwrap() - 1952.0 / 2105.0).abs() < 1e-12);
        assert!((m.specificity.unwrap() - 1358.0 / 1545.0).abs() < 1e-12);
        assert!((m.ppv.unwrap() - 1952.0 / 2139.0).abs() < 1e-12);
        assert!((m.npv.unwrap() - 1358.0 / 1511.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_yield_absent_metrics() {
        let m = derive(ConfusionCounts {
            tp: 0,
            fp: 0,
            tn: Some(5),
            fn_: Some(0),
        });
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(m.ppv, None);
        assert_eq!(m.npv, Some(1.0));
        assert_eq!(m.f1, None);

        let m = derive(ConfusionCounts {
            tp: 347,
            fp: 30,
            tn: None,
            fn_: None,
        });
        assert!((m.ppv.unwrap() - 347.0 / 377.0).abs() < 1e-12);
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.specificity, None);
        assert_eq!(m.npv, None);
        assert_eq!(m.f1, None);
    }

    #[test]
    fn regime_names_round_trip_through_strings() {
        for regime in Regime::ALL {
            assert_eq!(regime.as_str().parse::<Regime>().unwrap(), regime);
            let json = serde_json::to_string(&regime).unwrap();
            assert_eq!(json, format!("\"{}\"", regime.as_str()));
        }
        assert!("matrix-d".parse::<Regime>().is_err());
    }

    #[test]
    fn undefined_counts_absorb_on_addition() {
        let defined = ConfusionCounts {
            tp: 1,
            fp: 2,
            tn: Some(3),
            fn_: Some(4),
        };
        let undefined = ConfusionCounts {
            tp: 5,
            fp: 6,
            tn: None,
            fn_: None,
        };
        let sum = defined + undefined;
        assert_eq!((sum.tp, sum.fp, sum.tn, sum.fn_), (6, 8, None, None));
    }

    fn arbitrary_counts() -> impl Strategy<Value = ConfusionCounts> {
        (0u64..500, 0u64..500, 0u64..500, 0u64..500).prop_map(|(tp, fp, tn, fn_)| {
            ConfusionCounts {
                tp,
                fp,
                tn: Some(tn),
                fn_: Some(fn_),
            }
        })
    }

    fn arbitrary_scene() -> impl Strategy<Value = (SampleResult, Vec<GroundTruthLabel>)> {
        let cluster_strategy = proptest::collection::vec(
            (0usize..5, 0.0f64..=1.0, 0.0f64..300.0, 0.0f64..300.0, any::<bool>()),
            1..4,
        );
        let truth_strategy = proptest::collection::vec(
            (any::<bool>(), proptest::collection::vec((0.0f64..300.0, 0.0f64..300.0), 0..3)),
            5,
        );
        (proptest::collection::vec(cluster_strategy, 0..4), truth_strategy).prop_map(
            |(cluster_specs, truth_specs)| {
                let a = Alphabet::default();
                let clusters = cluster_specs
                    .into_iter()
                    .map(|members| {
                        let mut slots: Vec<Option<Detection>> = vec![None; a.len()];
                        let mut prediction_set = Vec::new();
                        let mut delimiter = None;
                        for (c, conf, x, y, assert_it) in members {
                            let l = a.labels().nth(c).unwrap();
                            let d = Detection::new(
                                BBox::new(x, y, x + 20.0, y + 20.0).unwrap(),
                                l,
                                conf,
                            )
                            .unwrap();
                            if delimiter.is_none() {
                                delimiter = Some(d.clone());
                            }
                            if slots[c].is_none() {
                                slots[c] = Some(d);
                                if assert_it {
                                    prediction_set.push(PredictionSetEntry {
                                        label: l,
                                        polarity: Polarity::Present,
                                        score: 1.0,
                                        source_confidence: conf,
                                    });
                                }
                            }
                        }
                        Cluster {
                            delimiter: delimiter.unwrap(),
                            members: slots,
                            prediction_set,
                        }
                    })
                    .collect();
                let truth = truth_specs
                    .into_iter()
                    .enumerate()
                    .map(|(c, (present, corners))| {
                        let l = a.labels().nth(c).unwrap();
                        let boxes: Vec<BBox> = corners
                            .into_iter()
                            .map(|(x, y)| BBox::new(x, y, x + 20.0, y + 20.0).unwrap())
                            .collect();
                        if present {
                            GroundTruthLabel::new(l, Polarity::Present, boxes).unwrap()
                        } else {
                            GroundTruthLabel::new(l, Polarity::Absent, vec![]).unwrap()
                        }
                    })
                    .collect();
                (
                    SampleResult {
                        slice_id: "s".into(),
                        challenging: false,
                        iou_threshold: 0.5,
                        conformal_threshold: 0.5,
                        clusters,
                    },
                    truth,
                )
            },
        )
    }

    proptest! {
        #[test]
        fn counts_are_additive_over_samples(
            per_sample in proptest::collection::vec(arbitrary_counts(), 1..20)
        ) {
            let total = per_sample
                .iter()
                .copied()
                .fold(ConfusionCounts::with_negatives(), |acc, c| acc + c);
            prop_assert_eq!(total.tp, per_sample.iter().map(|c| c.tp).sum::<u64>());
            prop_assert_eq!(total.fp, per_sample.iter().map(|c| c.fp).sum::<u64>());
            prop_assert_eq!(
                total.tn,
                Some(per_sample.iter().map(|c| c.tn.unwrap()).sum::<u64>())
            );
        }

        #[test]
        fn every_derived_metric_is_a_probability(counts in arbitrary_counts()) {
            let m = derive(counts);
            for value in [m.sensitivity, m.specificity, m.ppv, m.npv, m.f1] {
                if let Some(v) = value {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn f1_is_the_harmonic_mean_of_ppv_and_sensitivity(
            tp in 1u64..500, fp in 0u64..500, fn_ in 0u64..500,
        ) {
            let m = derive(ConfusionCounts { tp, fp, tn: Some(1), fn_: Some(fn_) });
            let (p, s, f1) = (m.ppv.unwrap(), m.sensitivity.unwrap(), m.f1.unwrap());
            prop_assert!((f1 - 2.0 * p * s / (p + s)).abs() < 1e-12);
        }

        #[test]
        fn localized_matching_never_beats_presence_matching(
            (result, truth) in arbitrary_scene()
        ) {
            let a = Alphabet::default();
            let strict =
                score_sample(&result, &truth, &a, MatchSpec::default_for(Regime::MatrixA))
                    .unwrap();
            let loose =
                score_sample(&result, &truth, &a, MatchSpec::default_for(Regime::MatrixB))
                    .unwrap();
            prop_assert!(strict.tp <= loose.tp);
            prop_assert!(strict.fp >= loose.fp);
            // Both regimes classify the same entries, just differently.
            prop_assert_eq!(strict.tp + strict.fp, loose.tp + loose.fp);
        }
    }
}
