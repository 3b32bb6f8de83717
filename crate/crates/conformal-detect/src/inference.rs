//! Clustering of raw detections and conformal prediction sets.
//!
//! Inference on one image runs in three stages:
//!
//! 1. **Delimiter selection.** The top-confidence box of each class is a
//!    seed. Seeds are visited in descending confidence (ties broken by class
//!    order) and each either founds a new cluster — when it overlaps no
//!    existing delimiter at the IoU threshold — or joins the first cluster
//!    whose delimiter it overlaps.
//! 2. **Fill.** Every remaining detection joins the first cluster (in
//!    creation order) whose delimiter it overlaps at the threshold, if any.
//! 3. **Condense.** Each cluster keeps one box per class: the delimiter for
//!    its own class, and the highest-confidence member for every other class
//!    (earliest member wins ties).
//!
//! [`conformalize`] then scores each cluster against a [`CalibrationModel`]:
//! for every class `c` with condensed confidence `s` (0 when the class is
//! absent from the cluster), the pair `(c, Present)` enters the prediction
//! set when the conformal score of `s` in the presence group **strictly**
//! exceeds the threshold, and `(c, Absent)` enters when the score of `1 − s`
//! in the absence group does.
//!
//! A sample is flagged *challenging* when some cluster's prediction set
//! contradicts itself — both polarities of one class, or two distinct
//! classes asserted present. [`ChallengeRule::AcrossClusters`] widens the
//! test to the union of all prediction sets on the sample.

use crate::alphabet::{Alphabet, ClassLabel, Polarity};
use crate::calibration::CalibrationModel;
use crate::error::{Error, Result};
use crate::sample::{top_box_per_class, Detection, Sample};

/// One `(class, polarity)` assertion with its conformal score and the
/// condensed detection confidence it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSetEntry {
    pub label: ClassLabel,
    pub polarity: Polarity,
    /// Conformal rank score that cleared the threshold.
    pub score: f64,
    /// Condensed confidence of the class in the cluster (0 when missing).
    /// For `Absent` entries the scored value is `1 − source_confidence`.
    pub source_confidence: f64,
}

/// A condensed cluster: delimiter, at most one member per class, and the
/// prediction set (empty until [`conformalize`] runs).
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub delimiter: Detection,
    /// Indexed by class; `members[delimiter.label]` is the delimiter itself.
    pub members: Vec<Option<Detection>>,
    pub prediction_set: Vec<PredictionSetEntry>,
}

impl Cluster {
    /// The condensed member for `label`, if the class appears in the cluster.
    pub fn member(&self, label: ClassLabel) -> Option<&Detection> {
        self.members.get(label.index()).and_then(|m| m.as_ref())
    }
}

fn check_threshold(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidThreshold { name, value });
    }
    Ok(())
}

/// Groups detections into condensed clusters at `iou_threshold`.
///
/// Delimiters of distinct clusters are pairwise below the threshold, and
/// every condensed member overlaps its delimiter at or above it.
pub fn build_clusters(
    detections: &[Detection],
    alphabet: &Alphabet,
    iou_threshold: f64,
) -> Result<Vec<Cluster>> {
    check_threshold("iou_threshold", iou_threshold)?;
    let k = alphabet.len();
    for det in detections {
        if det.label.index() >= k {
            return Err(Error::UnknownClass {
                name: format!("#{}", det.label.index()),
            });
        }
    }

    let mut seeds: Vec<usize> = top_box_per_class(detections, alphabet)
        .into_iter()
        .flatten()
        .collect();
    seeds.sort_by(|&a, &b| {
        detections[b]
            .confidence
            .total_cmp(&detections[a].confidence)
            .then(detections[a].label.index().cmp(&detections[b].label.index()))
    });

    // Per cluster: delimiter index plus attached member indices.
    let mut delimiters: Vec<usize> = Vec::new();
    let mut attached: Vec<Vec<usize>> = Vec::new();
    let mut selected = vec![false; detections.len()];

    for &s in &seeds {
        let home = delimiters
            .iter()
            .position(|&d| detections[s].bbox.iou(&detections[d].bbox) >= iou_threshold);
        match home {
            None => {
                delimiters.push(s);
                attached.push(Vec::new());
            }
            Some(i) => attached[i].push(s),
        }
        selected[s] = true;
    }

    for (i, det) in detections.iter().enumerate() {
        if selected[i] {
            continue;
        }
        if let Some(c) = delimiters
            .iter()
            .position(|&d| det.bbox.iou(&detections[d].bbox) >= iou_threshold)
        {
            attached[c].push(i);
            selected[i] = true;
        }
    }

    let clusters = delimiters
        .iter()
        .zip(&attached)
        .map(|(&d, members)| {
            let mut slots: Vec<Option<Detection>> = vec![None; k];
            slots[detections[d].label.index()] = Some(detections[d].clone());
            for &m in members {
                let slot = &mut slots[detections[m].label.index()];
                let supersedes = slot
                    .as_ref()
                    .is_none_or(|held| detections[m].confidence > held.confidence);
                if supersedes {
                    *slot = Some(detections[m].clone());
                }
            }
            Cluster {
                delimiter: detections[d].clone(),
                members: slots,
                prediction_set: Vec::new(),
            }
        })
        .collect();
    Ok(clusters)
}

/// Scores one cluster against the model, returning a copy whose prediction
/// set holds every `(class, polarity)` pair whose conformal score strictly
/// exceeds `conformal_threshold`, in class order with `Present` first.
pub fn conformalize(
    cluster: &Cluster,
    model: &CalibrationModel,
    conformal_threshold: f64,
) -> Result<Cluster> {
    check_threshold("conformal_threshold", conformal_threshold)?;
    let alphabet = model.alphabet();
    if cluster.members.len() != alphabet.len() {
        return Err(Error::InvalidInput(format!(
            "cluster has {} class slots but the model alphabet has {}",
            cluster.members.len(),
            alphabet.len()
        )));
    }
    let mut out = cluster.clone();
    out.prediction_set.clear();
    for label in alphabet.labels() {
        let s = cluster.member(label).map_or(0.0, |d| d.confidence);
        let present = model.conformal_score(label, Polarity::Present, s)?;
        if present > conformal_threshold {
            out.prediction_set.push(PredictionSetEntry {
                label,
                polarity: Polarity::Present,
                score: present,
                source_confidence: s,
            });
        }
        let absent = model.conformal_score(label, Polarity::Absent, 1.0 - s)?;
        if absent > conformal_threshold {
            out.prediction_set.push(PredictionSetEntry {
                label,
                polarity: Polarity::Absent,
                score: absent,
                source_confidence: s,
            });
        }
    }
    Ok(out)
}

/// Scope over which prediction-set contradictions mark a sample challenging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChallengeRule {
    /// Contradictions must occur inside a single cluster's prediction set.
    #[default]
    PerCluster,
    /// Contradictions are sought in the union of all prediction sets.
    AcrossClusters,
}

fn contradicts(entries: &[&PredictionSetEntry]) -> bool {
    let mut present_classes: Vec<ClassLabel> = Vec::new();
    for e in entries {
        if e.polarity == Polarity::Present && !present_classes.contains(&e.label) {
            present_classes.push(e.label);
        }
    }
    if present_classes.len() >= 2 {
        return true;
    }
    entries.iter().any(|e| {
        e.polarity == Polarity::Absent
            && entries
                .iter()
                .any(|o| o.label == e.label && o.polarity == Polarity::Present)
    })
}

/// Applies the default [`ChallengeRule::PerCluster`] contradiction test.
pub fn flag_challenging(clusters: &[Cluster]) -> bool {
    flag_challenging_with(clusters, ChallengeRule::PerCluster)
}

/// Returns whether the conformalized clusters contradict themselves under
/// the given rule: both polarities of one class, or two classes present.
pub fn flag_challenging_with(clusters: &[Cluster], rule: ChallengeRule) -> bool {
    match rule {
        ChallengeRule::PerCluster => clusters
            .iter()
            .any(|c| contradicts(&c.prediction_set.iter().collect::<Vec<_>>())),
        ChallengeRule::AcrossClusters => {
            let pooled: Vec<&PredictionSetEntry> = clusters
                .iter()
                .flat_map(|c| c.prediction_set.iter())
                .collect();
            contradicts(&pooled)
        }
    }
}

/// Conformal inference output for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub slice_id: String,
    pub challenging: bool,
    pub iou_threshold: f64,
    pub conformal_threshold: f64,
    pub clusters: Vec<Cluster>,
}

/// Clusters, conformalizes, and flags one sample with the default
/// [`ChallengeRule`].
pub fn infer(
    sample: &Sample,
    model: &CalibrationModel,
    iou_threshold: f64,
    conformal_threshold: f64,
) -> Result<SampleResult> {
    infer_with(
        sample,
        model,
        iou_threshold,
        conformal_threshold,
        ChallengeRule::default(),
    )
}

/// [`infer`] with an explicit contradiction rule.
pub fn infer_with(
    sample: &Sample,
    model: &CalibrationModel,
    iou_threshold: f64,
    conformal_threshold: f64,
    rule: ChallengeRule,
) -> Result<SampleResult> {
    let clusters = build_clusters(&sample.detections, model.alphabet(), iou_threshold)?
        .iter()
        .map(|c| conformalize(c, model, conformal_threshold))
        .collect::<Result<Vec<_>>>()?;
    let challenging = flag_challenging_with(&clusters, rule);
    Ok(SampleResult {
        slice_id: sample.slice_id.clone(),
        challenging,
        iou_threshold,
        conformal_threshold,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::calibrate;
    use crate::geometry::BBox;
    use proptest::prelude::*;

    fn det(alphabet: &Alphabet, class: &str, conf: f64, b: [f64; 4]) -> Detection {
        Detection::new(
            BBox::new(b[0], b[1], b[2], b[3]).unwrap(),
            alphabet.require(class).unwrap(),
            conf,
        )
        .unwrap()
    }

    fn member_classes(alphabet: &Alphabet, cluster: &Cluster) -> Vec<(String, f64)> {
        cluster
            .members
            .iter()
            .flatten()
            .map(|d| (alphabet.name(d.label).to_string(), d.confidence))
            .collect()
    }

    #[test]
    fn nine_boxes_condense_into_four_clusters() {
        let a = Alphabet::default();
        let detections = vec![
            det(&a, "IPH", 0.95, [0.0, 0.0, 100.0, 100.0]),
            det(&a, "SDH", 0.80, [10.0, 0.0, 110.0, 100.0]),
            det(&a, "IVH", 0.90, [300.0, 300.0, 400.0, 400.0]),
            det(&a, "EDH", 0.70, [600.0, 600.0, 700.0, 700.0]),
            det(&a, "SAH", 0.85, [300.0, 0.0, 400.0, 100.0]),
            det(&a, "IPH", 0.60, [0.0, 10.0, 100.0, 100.0]),
            det(&a, "SAH", 0.55, [0.0, 0.0, 100.0, 90.0]),
            det(&a, "IPH", 0.40, [310.0, 300.0, 410.0, 400.0]),
            det(&a, "IVH", 0.30, [600.0, 610.0, 700.0, 700.0]),
        ];
        // Fixture preconditions: the SDH seed and the three fillers overlap
        // exactly one delimiter each at the 0.5 threshold.
        let iou = |i: usize, j: usize| detections[i].bbox.iou(&detections[j].bbox);
        assert!(iou(1, 0) > 0.5 && iou(5, 0) > 0.5 && iou(6, 0) > 0.5);
        assert!(iou(7, 2) > 0.5 && iou(8, 3) > 0.5);
        assert!(iou(7, 0) < 0.5 && iou(8, 0) < 0.5 && iou(8, 2) < 0.5);

        let clusters = build_clusters(&detections, &a, 0.5).unwrap();
        assert_eq!(clusters.len(), 4);
        // Creation order follows seed confidence: IPH .95, IVH .90, SAH .85.
        // The SDH seed (.80) joins the first cluster; EDH (.70) founds the
        // fourth.
        assert_eq!(a.name(clusters[0].delimiter.label), "IPH");
        assert_eq!(a.name(clusters[1].delimiter.label), "IVH");
        assert_eq!(a.name(clusters[2].delimiter.label), "SAH");
        assert_eq!(a.name(clusters[3].delimiter.label), "EDH");
        assert_eq!(
            member_classes(&a, &clusters[0]),
            vec![
                ("IPH".to_string(), 0.95),
                ("SDH".to_string(), 0.80),
                ("SAH".to_string(), 0.55),
            ]
        );
        assert_eq!(
            member_classes(&a, &clusters[1]),
            vec![("IPH".to_string(), 0.40), ("IVH".to_string(), 0.90)]
        );
        assert_eq!(member_classes(&a, &clusters[2]), vec![("SAH".to_string(), 0.85)]);
        assert_eq!(
            member_classes(&a, &clusters[3]),
            vec![("IVH".to_string(), 0.30), ("EDH".to_string(), 0.70)]
        );
    }

    #[test]
    fn equal_confidence_seeds_found_clusters_in_class_order() {
        let a = Alphabet::default();
        // IPH and IVH tie at 0.9; their boxes overlap each other below the
        // threshold but a cheaper SDH box overlaps both. The SDH seed must
        // join the cluster founded first, which the class order says is IPH.
        let detections = vec![
            det(&a, "IVH", 0.9, [50.0, 0.0, 150.0, 100.0]),
            det(&a, "IPH", 0.9, [0.0, 0.0, 100.0, 100.0]),
            det(&a, "SDH", 0.5, [25.0, 0.0, 125.0, 100.0]),
        ];
        assert!(detections[0].bbox.iou(&detections[1].bbox) < 0.5);
        assert!(detections[2].bbox.iou(&detections[0].bbox) >= 0.5);
        assert!(detections[2].bbox.iou(&detections[1].bbox) >= 0.5);

        let clusters = build_clusters(&detections, &a, 0.5).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(a.name(clusters[0].delimiter.label), "IPH");
        assert_eq!(
            member_classes(&a, &clusters[0]),
            vec![("IPH".to_string(), 0.9), ("SDH".to_string(), 0.5)]
        );
        assert_eq!(member_classes(&a, &clusters[1]), vec![("IVH".to_string(), 0.9)]);
    }

    #[test]
    fn higher_confidence_member_supersedes_in_condensation() {
        let a = Alphabet::default();
        let detections = vec![
            det(&a, "IPH", 0.9, [0.0, 0.0, 100.0, 100.0]),
            det(&a, "IVH", 0.3, [0.0, 0.0, 100.0, 95.0]),
            det(&a, "IVH", 0.6, [0.0, 5.0, 100.0, 100.0]),
        ];
        let clusters = build_clusters(&detections, &a, 0.5).unwrap();
        assert_eq!(clusters.len(), 1);
        // The IVH seed is the 0.6 box; it is attached during seed selection
        // and the weaker 0.3 box cannot displace it.
        assert_eq!(
            member_classes(&a, &clusters[0]),
            vec![("IPH".to_string(), 0.9), ("IVH".to_string(), 0.6)]
        );
    }

    #[test]
    fn no_detections_means_no_clusters() {
        let a = Alphabet::default();
        let model = calibrate(&[Sample::new("cal", "r", "p")], &a).unwrap();
        let result = infer(&Sample::new("s", "r", "p"), &model, 0.5, 0.5).unwrap();
        assert!(result.clusters.is_empty());
        assert!(!result.challenging);
    }

    #[test]
    fn threshold_one_empties_every_prediction_set() {
        let a = Alphabet::default();
        let mut cal = Vec::new();
        for i in 0..5 {
            let mut s = Sample::new(format!("c{i}"), "r", "p");
            s.detections
                .push(det(&a, "IPH", 0.1 + 0.2 * i as f64, [0.0, 0.0, 10.0, 10.0]));
            cal.push(s);
        }
        let model = calibrate(&cal, &a).unwrap();
        let mut test = Sample::new("t", "r", "p");
        test.detections.push(det(&a, "IPH", 0.99, [0.0, 0.0, 10.0, 10.0]));
        let result = infer(&test, &model, 0.5, 1.0).unwrap();
        assert_eq!(result.clusters.len(), 1);
        assert!(result.clusters[0].prediction_set.is_empty());
        assert!(!result.challenging);
    }

    #[test]
    fn confident_detection_asserts_presence_and_missing_classes_absence() {
        let a = Alphabet::default();
        // Calibration mimics a detector forced to emit every class: IPH with
        // moderate confidences, the rest with low but non-zero ones.
        let mut cal = Vec::new();
        for i in 0..10 {
            let mut s = Sample::new(format!("c{i}"), "r", "p");
            s.detections
                .push(det(&a, "IPH", 0.05 * (i + 1) as f64, [0.0, 0.0, 10.0, 10.0]));
            for (j, class) in ["IVH", "SDH", "EDH", "SAH"].iter().enumerate() {
                let x = 20.0 * (j + 1) as f64;
                s.detections
                    .push(det(&a, class, 0.02 * (i + 1) as f64, [x, 0.0, x + 10.0, 10.0]));
            }
            cal.push(s);
        }
        let model = calibrate(&cal, &a).unwrap();
        let mut test = Sample::new("t", "r", "p");
        test.detections.push(det(&a, "IPH", 0.99, [0.0, 0.0, 10.0, 10.0]));
        let result = infer(&test, &model, 0.5, 0.5).unwrap();
        let set = &result.clusters[0].prediction_set;
        // 0.99 outranks all ten calibration values: presence score 1.0.
        let iph = a.require("IPH").unwrap();
        assert!(set
            .iter()
            .any(|e| e.label == iph && e.polarity == Polarity::Present && e.score == 1.0));
        assert!(!set.iter().any(|e| e.label == iph && e.polarity == Polarity::Absent));
        // Classes missing from the cluster probe their absence groups with
        // 1 - 0 = 1, which outranks every complement of a non-zero
        // calibration confidence.
        for class in ["IVH", "SDH", "EDH", "SAH"] {
            let label = a.require(class).unwrap();
            assert!(set
                .iter()
                .any(|e| e.label == label && e.polarity == Polarity::Absent && e.score == 1.0));
            assert!(!set.iter().any(|e| e.label == label && e.polarity == Polarity::Present));
        }
        assert!(!result.challenging);
    }

    #[test]
    fn class_never_seen_in_calibration_cannot_assert_absence() {
        // A class that never fired during calibration has an absence group of
        // exact 1.0 values; the strict rank of a 1.0 probe against it is 0,
        // so neither polarity of that class ever enters a prediction set.
        let a = Alphabet::default();
        let mut cal = Vec::new();
        for i in 0..5 {
            let mut s = Sample::new(format!("c{i}"), "r", "p");
            s.detections
                .push(det(&a, "IPH", 0.1 * (i + 1) as f64, [0.0, 0.0, 10.0, 10.0]));
            cal.push(s);
        }
        let model = calibrate(&cal, &a).unwrap();
        let mut test = Sample::new("t", "r", "p");
        test.detections.push(det(&a, "IPH", 0.99, [0.0, 0.0, 10.0, 10.0]));
        let result = infer(&test, &model, 0.5, 0.0).unwrap();
        let set = &result.clusters[0].prediction_set;
        let ivh = a.require("IVH").unwrap();
        assert!(!set.iter().any(|e| e.label == ivh));
    }

    #[test]
    fn two_present_classes_in_one_cluster_flag_the_sample() {
        let a = Alphabet::default();
        let mut cal = Vec::new();
        for i in 0..10 {
            let mut s = Sample::new(format!("c{i}"), "r", "p");
            let conf = 0.05 * (i + 1) as f64;
            s.detections.push(det(&a, "IPH", conf, [0.0, 0.0, 10.0, 10.0]));
            s.detections.push(det(&a, "IVH", conf, [20.0, 0.0, 30.0, 10.0]));
            cal.push(s);
        }
        let model = calibrate(&cal, &a).unwrap();
        let mut test = Sample::new("t", "r", "p");
        test.detections.push(det(&a, "IPH", 0.99, [0.0, 0.0, 10.0, 10.0]));
        test.detections.push(det(&a, "IVH", 0.98, [0.0, 0.0, 10.0, 10.0]));
        let result = infer(&test, &model, 0.5, 0.5).unwrap();
        assert_eq!(result.clusters.len(), 1);
        assert!(result.challenging);

        // The same two assertions split across distinct clusters only count
        // under the cross-cluster rule.
        let mut apart = Sample::new("t2", "r", "p");
        apart.detections.push(det(&a, "IPH", 0.99, [0.0, 0.0, 10.0, 10.0]));
        apart.detections.push(det(&a, "IVH", 0.98, [50.0, 0.0, 60.0, 10.0]));
        let per_cluster = infer(&apart, &model, 0.5, 0.5).unwrap();
        assert_eq!(per_cluster.clusters.len(), 2);
        assert!(!per_cluster.challenging);
        let pooled =
            infer_with(&apart, &model, 0.5, 0.5, ChallengeRule::AcrossClusters).unwrap();
        assert!(pooled.challenging);
    }

    fn arbitrary_detections(max: usize) -> impl Strategy<Value = Vec<Detection>> {
        proptest::collection::vec(
            (
                0u16..5,
                0.0f64..=1.0,
                (0.0f64..400.0, 0.0f64..400.0, 1.0f64..120.0, 1.0f64..120.0),
            ),
            0..max,
        )
        .prop_map(|specs| {
            let a = Alphabet::default();
            specs
                .into_iter()
                .map(|(class, conf, (x, y, w, h))| {
                    let label = a.labels().nth(class as usize).unwrap();
                    Detection::new(BBox::new(x, y, x + w, y + h).unwrap(), label, conf).unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn delimiters_are_pairwise_disjoint_and_members_overlap_home(
            detections in arbitrary_detections(40),
            thr in 0.05f64..=1.0,
        ) {
            let a = Alphabet::default();
            let clusters = build_clusters(&detections, &a, thr).unwrap();
            for (i, ci) in clusters.iter().enumerate() {
                for cj in &clusters[i + 1..] {
                    prop_assert!(ci.delimiter.bbox.iou(&cj.delimiter.bbox) < thr);
                }
                for m in ci.members.iter().flatten() {
                    prop_assert!(m.bbox.iou(&ci.delimiter.bbox) >= thr);
                }
                let slot = &ci.members[ci.delimiter.label.index()];
                prop_assert_eq!(slot.as_ref(), Some(&ci.delimiter));
            }
        }

        #[test]
        fn raising_the_conformal_threshold_shrinks_prediction_sets(
            detections in arbitrary_detections(20),
            cal_confs in proptest::collection::vec(0.0f64..=1.0, 3..30),
            t_lo in 0.0f64..=1.0,
            t_hi in 0.0f64..=1.0,
        ) {
            let a = Alphabet::default();
            let cal: Vec<Sample> = cal_confs
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let mut s = Sample::new(format!("c{i}"), "r", "p");
                    s.detections.push(det(&a, "IPH", c, [0.0, 0.0, 10.0, 10.0]));
                    s
                })
                .collect();
            let model = calibrate(&cal, &a).unwrap();
            let (lo, hi) = if t_lo <= t_hi { (t_lo, t_hi) } else { (t_hi, t_lo) };
            for cluster in build_clusters(&detections, &a, 0.5).unwrap() {
                let wide = conformalize(&cluster, &model, lo).unwrap();
                let narrow = conformalize(&cluster, &model, hi).unwrap();
                for e in &narrow.prediction_set {
                    prop_assert!(wide.prediction_set.contains(e));
                }
            }
        }

        #[test]
        fn no_self_contradiction_at_or_above_half(
            detections in arbitrary_detections(20),
            cal_confs in proptest::collection::vec(0.0f64..=1.0, 3..30),
            t in 0.5f64..=1.0,
        ) {
            // Presence and absence scores of one class count disjoint halves
            // of the same calibration group, so both cannot strictly exceed
            // 0.5 for the same condensed confidence.
            let a = Alphabet::default();
            let cal: Vec<Sample> = cal_confs
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let mut s = Sample::new(format!("c{i}"), "r", "p");
                    s.detections.push(det(&a, "IPH", c, [0.0, 0.0, 10.0, 10.0]));
                    s.detections.push(det(&a, "IVH", 1.0 - c, [20.0, 0.0, 30.0, 10.0]));
                    s
                })
                .collect();
            let model = calibrate(&cal, &a).unwrap();
            for cluster in build_clusters(&detections, &a, 0.5).unwrap() {
                let scored = conformalize(&cluster, &model, t).unwrap();
                for label in a.labels() {
                    let present = scored
                        .prediction_set
                        .iter()
                        .any(|e| e.label == label && e.polarity == Polarity::Present);
                    let absent = scored
                        .prediction_set
                        .iter()
                        .any(|e| e.label == label && e.polarity == Polarity::Absent);
                    prop_assert!(!(present && absent));
                }
            }
        }
    }
}
