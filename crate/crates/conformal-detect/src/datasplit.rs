//! Reader-concordance partition and the grouped, stratified dataset split.
//!
//! [`partition`] routes every `(sample, class)` pair by reader unanimity:
//! unanimous pairs land on the definite side with their consensus polarity,
//! disputed pairs on the challenging side. A sample whose classes are all
//! unanimously absent is negative — unless it carries ground-truth boxes,
//! which contradicts the readers and routes it to challenging. A sample some
//! reader marked positive but that has no boxes at all is excluded, since it
//! can neither calibrate nor score localization.
//!
//! [`split`] assigns whole groups (all slices sharing a patient, or failing
//! that a series) to training/tuning/calibration/test so no identifier spans
//! two subsets. Groups are visited largest-first (shuffled by seed within
//! equal sizes) and each goes to the subset minimizing an equally weighted
//! sum of two terms: the subset's size overshoot relative to its own target,
//! and the L1 divergence between the subset's per-class share and the global
//! share after the addition. Relative overshoot makes a small subset's
//! deficit count as much as the large one's, so every subset fills.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, ClassLabel, Polarity};
use crate::error::{Error, Result};
use crate::sample::Sample;

/// The four destination subsets, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Training,
    Tuning,
    Calibration,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 4] = [
        Subset::Training,
        Subset::Tuning,
        Subset::Calibration,
        Subset::Test,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Training => "training",
            Subset::Tuning => "tuning",
            Subset::Calibration => "calibration",
            Subset::Test => "test",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A sample on the definite side with its unanimous per-class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DefiniteEntry {
    pub sample: Sample,
    /// One entry per unanimous class, in class order.
    pub consensus: Vec<(ClassLabel, Polarity)>,
}

/// Why a sample landed on the challenging side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChallengingReason {
    /// Readers disagreed on at least one class.
    ReaderDisagreement,
    /// Every reader called the sample negative, yet it carries boxes.
    BoxesWithoutReaderPositive,
}

/// A sample on the challenging side with the classes in dispute.
#[derive(Debug, Clone, PartialEq)]
pub struct ChallengingEntry {
    pub sample: Sample,
    /// Disputed classes (or box-carrying classes when the readers were
    /// unanimously negative), in class order.
    pub disputed: Vec<ClassLabel>,
    pub reason: ChallengingReason,
}

/// A sample removed from the corpus before splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedEntry {
    pub sample: Sample,
    pub reason: String,
}

/// Output of [`partition`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartitionResult {
    pub definite: Vec<DefiniteEntry>,
    pub challenging: Vec<ChallengingEntry>,
    pub negative: Vec<Sample>,
    pub excluded: Vec<ExcludedEntry>,
}

fn total_boxes(sample: &Sample) -> usize {
    sample
        .ground_truth
        .as_deref()
        .map_or(0, |t| t.iter().map(|g| g.boxes.len()).sum())
}

/// Routes every sample (and every class within it) by reader concordance.
pub fn partition(samples: &[Sample], alphabet: &Alphabet) -> Result<PartitionResult> {
    let k = alphabet.len();
    let mut out = PartitionResult::default();
    for sample in samples {
        let readers = sample.readers.as_deref().filter(|r| !r.is_empty()).ok_or(
            Error::MissingReaders {
                slice_id: sample.slice_id.clone(),
            },
        )?;
        for reader in readers {
            if reader.labels().len() != k {
                return Err(Error::ReaderCoverage {
                    slice_id: sample.slice_id.clone(),
                    reader_id: reader.reader_id.clone(),
                });
            }
        }

        let any_positive = readers
            .iter()
            .any(|r| r.labels().iter().any(|&p| p == Polarity::Present));
        if any_positive && total_boxes(sample) == 0 {
            out.excluded.push(ExcludedEntry {
                sample: sample.clone(),
                reason: "no-boxes".to_string(),
            });
            continue;
        }

        let mut consensus = Vec::new();
        let mut disputed = Vec::new();
        for label in alphabet.labels() {
            let first = readers[0].polarity(label);
            if readers.iter().all(|r| r.polarity(label) == first) {
                consensus.push((label, first));
            } else {
                disputed.push(label);
            }
        }

        let all_absent_unanimous = disputed.is_empty()
            && consensus.iter().all(|&(_, p)| p == Polarity::Absent);
        if all_absent_unanimous {
            if total_boxes(sample) > 0 {
                let boxed_classes = sample
                    .ground_truth
                    .as_deref()
                    .unwrap_or_default()
                    .iter()
                    .filter(|g| !g.boxes.is_empty())
                    .map(|g| g.label)
                    .collect();
                out.challenging.push(ChallengingEntry {
                    sample: sample.clone(),
                    disputed: boxed_classes,
                    reason: ChallengingReason::BoxesWithoutReaderPositive,
                });
            } else {
                out.negative.push(sample.clone());
            }
            continue;
        }

        if !disputed.is_empty() {
            out.challenging.push(ChallengingEntry {
                sample: sample.clone(),
                disputed,
                reason: ChallengingReason::ReaderDisagreement,
            });
        }
        if !consensus.is_empty() {
            out.definite.push(DefiniteEntry {
                sample: sample.clone(),
                consensus,
            });
        }
    }
    Ok(out)
}

/// Default training/tuning/calibration/test fractions.
pub const DEFAULT_FRACTIONS: [f64; 4] = [0.70, 0.10, 0.10, 0.10];

/// Group-level subset assignment plus bookkeeping for auditing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    /// Group key (`patient:…`, `series:…`, or `slice:…`) to subset.
    pub assignment: BTreeMap<String, Subset>,
    pub target_fractions: [f64; 4],
    pub subset_slice_counts: [usize; 4],
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    /// The subset a sample's group was assigned to, if any.
    pub fn subset_of(&self, sample: &Sample) -> Option<Subset> {
        self.assignment.get(&group_key(sample)).copied()
    }
}

/// The leakage-prevention key: patient when known, else series, else the
/// slice itself. Prefixes keep the three id spaces from colliding.
pub fn group_key(sample: &Sample) -> String {
    if !sample.patient_id.is_empty() {
        format!("patient:{}", sample.patient_id)
    } else if !sample.series_id.is_empty() {
        format!("series:{}", sample.series_id)
    } else {
        format!("slice:{}", sample.slice_id)
    }
}

struct GroupStat {
    slices: usize,
    class_counts: Vec<u64>,
}

fn l1_divergence(counts: &[u64], global_share: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return global_share.iter().sum();
    }
    counts
        .iter()
        .zip(global_share)
        .map(|(&c, &g)| (c as f64 / total as f64 - g).abs())
        .sum()
}

/// Assigns every group of `definite` to one subset.
///
/// Deterministic for a fixed seed; group integrity is absolute. A group
/// larger than every subset target is forced into training with a warning.
pub fn split(
    definite: &[DefiniteEntry],
    alphabet: &Alphabet,
    fractions: [f64; 4],
    seed: u64,
) -> Result<SplitAssignment> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidFractions { fractions });
    }
    if definite.is_empty() {
        return Err(Error::EmptySplit);
    }

    let k = alphabet.len();
    let mut groups: BTreeMap<String, GroupStat> = BTreeMap::new();
    for entry in definite {
        let stat = groups.entry(group_key(&entry.sample)).or_insert(GroupStat {
            slices: 0,
            class_counts: vec![0; k],
        });
        stat.slices += 1;
        for &(label, polarity) in &entry.consensus {
            if polarity == Polarity::Present {
                stat.class_counts[label.index()] += 1;
            }
        }
    }

    let total_slices: usize = groups.values().map(|g| g.slices).sum();
    let mut global_counts = vec![0u64; k];
    for stat in groups.values() {
        for (g, c) in global_counts.iter_mut().zip(&stat.class_counts) {
            *g += c;
        }
    }
    let global_total: u64 = global_counts.iter().sum();
    let global_share: Vec<f64> = if global_total == 0 {
        vec![0.0; k]
    } else {
        global_counts
            .iter()
            .map(|&c| c as f64 / global_total as f64)
            .collect()
    };

    // Seeded shuffle decides the order among equal-sized groups; the stable
    // sort then visits groups largest-first.
    let mut order: Vec<&String> = groups.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by_key(|key| std::cmp::Reverse(groups[*key].slices));

    let targets: [f64; 4] = std::array::from_fn(|s| fractions[s] * total_slices as f64);
    let max_target = targets.iter().cloned().fold(f64::MIN, f64::max);
    let mut assigned_slices = [0usize; 4];
    let mut assigned_counts: Vec<Vec<u64>> = vec![vec![0; k]; 4];
    let mut assignment = BTreeMap::new();
    let mut warnings = Vec::new();

    for key in order {
        let stat = &groups[key];
        let choice = if stat.slices as f64 > max_target {
            warnings.push(format!(
                "group {key} has {} slices, more than any subset target; forced into training",
                stat.slices
            ));
            Subset::Training
        } else {
            let mut best = Subset::Training;
            let mut best_score = f64::INFINITY;
            for (s, subset) in Subset::ALL.into_iter().enumerate() {
                let score = if targets[s] == 0.0 {
                    // A zero-fraction subset never receives a group.
                    f64::INFINITY
                } else {
                    let overshoot = (assigned_slices[s] + stat.slices) as f64 - targets[s];
                    let size_term = overshoot / targets[s];
                    let merged: Vec<u64> = assigned_counts[s]
                        .iter()
                        .zip(&stat.class_counts)
                        .map(|(&a, &b)| a + b)
                        .collect();
                    // L1 over shares tops out at 2; halve it to a rate.
                    0.5 * size_term + 0.5 * (l1_divergence(&merged, &global_share) / 2.0)
                };
                // Strict improvement keeps the earliest subset on ties.
                if score < best_score {
                    best_score = score;
                    best = subset;
                }
            }
            best
        };
        let s = choice as usize;
        assigned_slices[s] += stat.slices;
        for (a, c) in assigned_counts[s].iter_mut().zip(&stat.class_counts) {
            *a += c;
        }
        assignment.insert(key.clone(), choice);
    }

    Ok(SplitAssignment {
        assignment,
        target_fractions: fractions,
        subset_slice_counts: assigned_slices,
        warnings,
    })
}
