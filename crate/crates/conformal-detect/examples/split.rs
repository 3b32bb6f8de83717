//! Consensus partitioning and leakage-free subset splitting.
//!
//! Multi-reader opinions route every (slice, class) decision: unanimous
//! classes form the definite corpus, disputed ones go to the challenging
//! queue, all-negative slices without boxes are negative, and positive
//! slices without a single ground-truth box are excluded as inconsistent.
//! The definite corpus is then split by patient group, so no patient spans
//! two subsets, while subset sizes chase the target fractions and class
//! shares chase the global shares.
//!
//! Run with: cargo run --example split

use std::collections::BTreeMap;

use conformal_detect::datasplit::{group_key, partition, split, Subset, DEFAULT_FRACTIONS};
use conformal_detect::simulator::{generate, SimConfig};
use conformal_detect::Result;

fn main() -> Result<()> {
    let config = SimConfig {
        seed: 13,
        n_samples: 3000,
        class_priors: vec![0.16; 5],
        ambiguity_rate: 0.15,
        n_patients: 150,
        ..SimConfig::default()
    };
    let corpus = generate(&config)?;
    let alphabet = &config.alphabet;

    let parts = partition(&corpus.samples, alphabet)?;
    println!(
        "partition: {} definite, {} challenging, {} negative, {} excluded",
        parts.definite.len(),
        parts.challenging.len(),
        parts.negative.len(),
        parts.excluded.len(),
    );
    if let Some(c) = parts.challenging.first() {
        let disputed: Vec<_> = c.disputed.iter().map(|&l| alphabet.name(l)).collect();
        println!(
            "  e.g. slice {} challenged on {:?} ({:?})",
            c.sample.slice_id, disputed, c.reason,
        );
    }

    let assignment = split(&parts.definite, alphabet, DEFAULT_FRACTIONS, 99)?;
    let total: usize = assignment.subset_slice_counts.iter().sum();
    println!("\nsubset sizes against targets:");
    for (i, &subset) in Subset::ALL.iter().enumerate() {
        println!(
            "  {subset:<12} {:>5} slices ({:.3} of {total}; target {:.2})",
            assignment.subset_slice_counts[i],
            assignment.subset_slice_counts[i] as f64 / total as f64,
            DEFAULT_FRACTIONS[i],
        );
    }

    // No patient group may span two subsets — check it the hard way.
    let mut seen: BTreeMap<String, Subset> = BTreeMap::new();
    for entry in &parts.definite {
        let subset = assignment
            .subset_of(&entry.sample)
            .expect("assigned during split");
        if let Some(previous) = seen.insert(group_key(&entry.sample), subset) {
            assert_eq!(previous, subset, "a patient group leaked across subsets");
        }
    }
    println!("\nverified: every patient group stays within one subset");

    // Per-class presence shares inside each subset stay near global shares.
    let global = class_shares(&parts.definite, alphabet.len(), None, &assignment);
    println!("\npresence share per class (global vs per subset):");
    for (c, name) in alphabet.names().iter().enumerate() {
        let per: Vec<String> = Subset::ALL
            .iter()
            .map(|&s| {
                let share = class_shares(&parts.definite, alphabet.len(), Some(s), &assignment);
                format!("{}: {:.3}", s, share[c])
            })
            .collect();
        println!("  {name}: global {:.3} | {}", global[c], per.join(" | "));
    }
    Ok(())
}

fn class_shares(
    definite: &[conformal_detect::datasplit::DefiniteEntry],
    k: usize,
    subset: Option<Subset>,
    assignment: &conformal_detect::datasplit::SplitAssignment,
) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    let mut total = 0usize;
    for entry in definite {
        if let Some(wanted) = subset {
            if assignment.subset_of(&entry.sample) != Some(wanted) {
                continue;
            }
        }
        total += 1;
        for &(label, polarity) in &entry.consensus {
            if polarity == conformal_detect::Polarity::Present {
                counts[label.index()] += 1;
            }
        }
    }
    counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect()
}
