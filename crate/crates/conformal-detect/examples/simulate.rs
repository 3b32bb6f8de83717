//! Draw a synthetic detection corpus with known generative truth.
//!
//! The simulator stands in for a detector plus annotators: every slice gets
//! one candidate box per class, positives carry a high-confidence box for
//! their primary class, and a configurable share of positives also carry an
//! overlapping near-equal-confidence box for a second class (the ambiguity
//! the challenging-case flag is meant to catch).
//!
//! Run with: cargo run --example simulate

use conformal_detect::simulator::{generate, SimConfig};
use conformal_detect::Result;

fn main() -> Result<()> {
    let config = SimConfig {
        seed: 42,
        n_samples: 2000,
        ambiguity_rate: 0.25,
        clutter_rate: 0.4,
        n_patients: 120,
        ..SimConfig::default()
    };
    let corpus = generate(&config)?;

    let positives = corpus
        .generator_truth
        .iter()
        .filter(|t| t.primary.is_some())
        .count();
    let ambiguous = corpus.generator_truth.iter().filter(|t| t.ambiguous).count();
    println!("corpus: {} slices, {} patients", corpus.samples.len(), config.n_patients);
    println!("positives: {positives}   ambiguous: {ambiguous}");

    // Per-class primary counts track the priors.
    for (c, name) in config.alphabet.names().iter().enumerate() {
        let count = corpus
            .generator_truth
            .iter()
            .filter(|t| t.primary.as_deref() == Some(name))
            .count();
        println!(
            "  {name}: {count} primaries (prior {:.2})",
            config.class_priors[c]
        );
    }

    // Show one ordinary slice and one ambiguous slice in full.
    for wanted in [false, true] {
        let (sample, truth) = corpus
            .samples
            .iter()
            .zip(&corpus.generator_truth)
            .find(|(_, t)| t.ambiguous == wanted && t.primary.is_some())
            .expect("both kinds exist at these rates");
        println!(
            "\nslice {} (primary {}, {}):",
            sample.slice_id,
            truth.primary.as_deref().unwrap_or("-"),
            if truth.ambiguous { "ambiguous" } else { "clean" },
        );
        for d in &sample.detections {
            println!(
                "  {:>4} conf {:.3}  box [{:6.1}, {:6.1}, {:6.1}, {:6.1}]",
                config.alphabet.name(d.label),
                d.confidence,
                d.bbox.x1(),
                d.bbox.y1(),
                d.bbox.x2(),
                d.bbox.y2(),
            );
        }
    }

    // The corpus is a pure function of its configuration.
    let again = generate(&config)?;
    assert_eq!(corpus, again);
    println!("\nregenerating with the same seed reproduced the corpus exactly");
    Ok(())
}
