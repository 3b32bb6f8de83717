//! Mondrian calibration groups and conformal rank scores.
//!
//! Calibration builds `2 × |alphabet|` groups: for every class `c`, a
//! `Present` group holding the highest detection confidence for `c` on each
//! calibration sample (0 when the class never fired), and an `Absent` group
//! holding the additive complements `1 − confidence` of those same values.
//!
//! The conformal score of a test value `hnu` against a group of size `n` is
//! its left-insertion rank divided by `n`:
//!
//! ```text
//! score(hnu) = |{ v in group : v < hnu }| / n
//! ```
//!
//! Ties sit at the left edge of their run, so a value equal to a group member
//! does not count that member. For draws exchangeable with the group, the
//! score is uniform on the rank grid, which is what turns a threshold `t`
//! into an inclusion rate of `1 − t`.

use crate::alphabet::{Alphabet, ClassLabel, Polarity};
use crate::error::{Error, Result};
use crate::sample::{top_box_per_class, Sample};

/// One sorted group of calibration values for a `(class, polarity)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MondrianGroup {
    label: ClassLabel,
    polarity: Polarity,
    values: Vec<f64>,
}

impl MondrianGroup {
    /// Builds a group, sorting `values` and validating they lie in `[0, 1]`.
    pub fn new(label: ClassLabel, polarity: Polarity, mut values: Vec<f64>) -> Result<Self> {
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfidence(v));
            }
        }
        values.sort_by(f64::total_cmp);
        Ok(MondrianGroup {
            label,
            polarity,
            values,
        })
    }

    pub fn label(&self) -> ClassLabel {
        self.label
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Count of group values strictly below `hnu` (the left-insertion index).
    pub fn insertion_index(&self, hnu: f64) -> usize {
        self.values.partition_point(|&v| v < hnu)
    }

    /// Left-insertion rank divided by the raw group size.
    pub fn score(&self, hnu: f64) -> f64 {
        self.insertion_index(hnu) as f64 / self.values.len() as f64
    }
}

/// A full set of Mondrian groups plus the metadata needed to reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    alphabet: Alphabet,
    /// Indexed by `2 * class + polarity_slot`, one group per pair.
    groups: Vec<MondrianGroup>,
    sample_count: usize,
    created_at: String,
}

fn polarity_slot(polarity: Polarity) -> usize {
    match polarity {
        Polarity::Present => 0,
        Polarity::Absent => 1,
    }
}

impl CalibrationModel {
    /// Assembles a model from pre-built groups, re-validating every model
    /// invariant: one group per `(class, polarity)` pair and all group sizes
    /// equal to `sample_count >= 1`.
    pub fn from_groups(
        alphabet: Alphabet,
        groups: Vec<MondrianGroup>,
        sample_count: usize,
        created_at: String,
    ) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::ModelInvariant("sample_count must be at least 1".into()));
        }
        let k = alphabet.len();
        if groups.len() != 2 * k {
            return Err(Error::ModelInvariant(format!(
                "expected {} groups for {} classes, found {}",
                2 * k,
                k,
                groups.len()
            )));
        }
        let mut slots: Vec<Option<MondrianGroup>> = (0..2 * k).map(|_| None).collect();
        for g in groups {
            if g.len() != sample_count {
                return Err(Error::ModelInvariant(format!(
                    "group ({}, {}) has {} values, expected {}",
                    alphabet
                        .names()
                        .get(g.label().index())
                        .cloned()
                        .unwrap_or_else(|| format!("#{}", g.label().index())),
                    g.polarity(),
                    g.len(),
                    sample_count
                )));
            }
            let idx = g
                .label()
                .index()
                .checked_mul(2)
                .map(|i| i + polarity_slot(g.polarity()))
                .filter(|&i| i < 2 * k)
                .ok_or_else(|| Error::ModelInvariant("group class outside alphabet".into()))?;
            if slots[idx].is_some() {
                return Err(Error::ModelInvariant(format!(
                    "duplicate group for ({}, {})",
                    alphabet.name(g.label()),
                    g.polarity()
                )));
            }
            slots[idx] = Some(g);
        }
        let groups = slots
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::ModelInvariant("missing a (class, polarity) group".into()))?;
        Ok(CalibrationModel {
            alphabet,
            groups,
            sample_count,
            created_at,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn created_at(&self) -> &str {
        &self.created_at
    }

    pub fn set_created_at(&mut self, created_at: impl Into<String>) {
        self.created_at = created_at.into();
    }

    /// Groups in canonical order: class by class, `Present` before `Absent`.
    pub fn groups(&self) -> impl Iterator<Item = &MondrianGroup> {
        self.groups.iter()
    }

    pub fn group(&self, label: ClassLabel, polarity: Polarity) -> Result<&MondrianGroup> {
        self.groups
            .get(label.index() * 2 + polarity_slot(polarity))
            .ok_or_else(|| Error::MissingGroup {
                class: self
                    .alphabet
                    .names()
                    .get(label.index())
                    .cloned()
                    .unwrap_or_else(|| format!("#{}", label.index())),
                polarity,
            })
    }

    /// Conformal score of `hnu` against the `(label, polarity)` group.
    pub fn conformal_score(&self, label: ClassLabel, polarity: Polarity, hnu: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&hnu) {
            return Err(Error::InvalidConfidence(hnu));
        }
        Ok(self.group(label, polarity)?.score(hnu))
    }
}

/// Builds Mondrian groups from calibration samples.
///
/// Every sample contributes to every group: classes with no detection on a
/// sample contribute confidence 0 to their `Present` group (and therefore 1
/// to their `Absent` group), mirroring a detector that was forced to emit a
/// candidate for each class.
pub fn calibrate(samples: &[Sample], alphabet: &Alphabet) -> Result<CalibrationModel> {
    if samples.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let k = alphabet.len();
    let mut presence: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); k];
    for sample in samples {
        let tops = top_box_per_class(&sample.detections, alphabet);
        for (c, top) in tops.iter().enumerate() {
            let conf = top.map_or(0.0, |i| sample.detections[i].confidence);
            presence[c].push(conf);
        }
    }
    let mut groups = Vec::with_capacity(2 * k);
    for (c, label) in alphabet.labels().enumerate() {
        let absent: Vec<f64> = presence[c].iter().map(|&v| 1.0 - v).collect();
        groups.push(MondrianGroup::new(label, Polarity::Present, presence[c].clone())?);
        groups.push(MondrianGroup::new(label, Polarity::Absent, absent)?);
    }
    CalibrationModel::from_groups(alphabet.clone(), groups, samples.len(), String::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::sample::Detection;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_class_alphabet() -> Alphabet {
        Alphabet::new(["IPH"]).unwrap()
    }

    fn sample_with(alphabet: &Alphabet, confs: &[(&str, f64)], id: &str) -> Sample {
        let mut s = Sample::new(id, "series", "patient");
        for (i, (class, conf)) in confs.iter().enumerate() {
            let x = 20.0 * i as f64;
            s.detections.push(
                Detection::new(
                    BBox::new(x, 0.0, x + 10.0, 10.0).unwrap(),
                    alphabet.require(class).unwrap(),
                    *conf,
                )
                .unwrap(),
            );
        }
        s
    }

    #[test]
    fn groups_hold_sorted_tops_and_complements() {
        let a = Alphabet::default();
        let samples = vec![
            sample_with(&a, &[("IPH", 0.2)], "s1"),
            sample_with(&a, &[("IPH", 0.9)], "s2"),
            sample_with(&a, &[("IPH", 0.5)], "s3"),
        ];
        let model = calibrate(&samples, &a).unwrap();
        let iph = a.require("IPH").unwrap();
        assert_eq!(
            model.group(iph, Polarity::Present).unwrap().values(),
            &[0.2, 0.5, 0.9]
        );
        let absent = model.group(iph, Polarity::Absent).unwrap().values().to_vec();
        assert_eq!(absent, vec![1.0 - 0.9, 0.5, 1.0 - 0.2]);
        // Classes that never fired get zero-filled presence groups.
        let sah = a.require("SAH").unwrap();
        assert_eq!(model.group(sah, Polarity::Present).unwrap().values(), &[0.0; 3]);
        assert_eq!(model.group(sah, Polarity::Absent).unwrap().values(), &[1.0; 3]);
    }

    #[test]
    fn score_is_strict_rank_over_raw_size() {
        let a = single_class_alphabet();
        let label = a.require("IPH").unwrap();
        let group =
            MondrianGroup::new(label, Polarity::Present, vec![0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        assert_eq!(group.score(0.6), 3.0 / 5.0);
        assert_eq!(group.score(0.05), 0.0);
        assert_eq!(group.score(0.99), 1.0);
        // Ties do not count: strictly-less only.
        assert_eq!(group.score(0.5), 2.0 / 5.0);
    }

    #[test]
    fn empty_calibration_is_rejected() {
        let a = Alphabet::default();
        assert!(matches!(calibrate(&[], &a), Err(Error::EmptyCalibration)));
    }

    #[test]
    fn detection_free_sample_yields_degenerate_groups() {
        let a = Alphabet::default();
        let samples = vec![Sample::new("s1", "r", "p")];
        let model = calibrate(&samples, &a).unwrap();
        for label in a.labels() {
            assert_eq!(model.group(label, Polarity::Present).unwrap().values(), &[0.0]);
            assert_eq!(model.group(label, Polarity::Absent).unwrap().values(), &[1.0]);
        }
    }

    #[test]
    fn foreign_label_reports_missing_group() {
        let small = single_class_alphabet();
        let big = Alphabet::default();
        let model = calibrate(&[sample_with(&small, &[("IPH", 0.4)], "s1")], &small).unwrap();
        let foreign = big.require("SAH").unwrap();
        assert!(matches!(
            model.conformal_score(foreign, Polarity::Present, 0.5),
            Err(Error::MissingGroup { .. })
        ));
        assert!(matches!(
            model.conformal_score(big.require("IPH").unwrap(), Polarity::Present, 1.5),
            Err(Error::InvalidConfidence(_))
        ));
    }

    #[test]
    fn score_agrees_with_linear_scan_on_random_groups() {
        let a = single_class_alphabet();
        let label = a.require("IPH").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..100 {
            let n = rng.random_range(1..=60);
            let values: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..=20) as f64) / 20.0)
                .collect();
            let group = MondrianGroup::new(label, Polarity::Present, values.clone()).unwrap();
            for _ in 0..10 {
                let hnu = if rng.random_range(0..2) == 0 {
                    values[rng.random_range(0..values.len())]
                } else {
                    rng.random::<f64>()
                };
                let oracle = values.iter().filter(|&&v| v < hnu).count() as f64 / n as f64;
                assert_eq!(group.score(hnu), oracle);
            }
        }
    }

    #[test]
    fn scores_of_exchangeable_draws_are_uniform() {
        // Group values and probes from the same distribution: the empirical
        // CDF of the scores must match the uniform CDF within 0.02.
        let a = single_class_alphabet();
        let label = a.require("IPH").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let group = MondrianGroup::new(label, Polarity::Present, values).unwrap();
        let probes: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        for t in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let below = probes.iter().filter(|&&p| group.score(p) <= t).count();
            let frac = below as f64 / probes.len() as f64;
            assert!(
                (frac - t).abs() <= 0.02,
                "P(score <= {t}) = {frac}, expected about {t}"
            );
        }
    }

    proptest! {
        #[test]
        fn score_is_monotone_in_hnu(
            mut values in proptest::collection::vec(0.0f64..=1.0, 1..80),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            values.sort_by(f64::total_cmp);
            let alphabet = Alphabet::new(["X"]).unwrap();
            let label = alphabet.require("X").unwrap();
            let group = MondrianGroup::new(label, Polarity::Present, values).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(group.score(lo) <= group.score(hi));
        }
    }
}
