//! Build a Mondrian calibration model and inspect its value pools.
//!
//! Calibration keeps one pool of values per (class, polarity) group: the
//! presence pool holds each slice's top confidence for the class, the
//! absence pool holds its complement. A new confidence is scored by its
//! strict rank within the matching pool, so scores are uniform under
//! exchangeability — which is the whole guarantee.
//!
//! Run with: cargo run --example calibrate

use conformal_detect::calibration::calibrate;
use conformal_detect::simulator::{generate, SimConfig};
use conformal_detect::{Polarity, Result};

fn main() -> Result<()> {
    let config = SimConfig {
        seed: 7,
        n_samples: 500,
        ..SimConfig::default()
    };
    let corpus = generate(&config)?;
    let model = calibrate(&corpus.samples, &config.alphabet)?;

    println!(
        "model over {} classes, {} slices, {} groups",
        config.alphabet.len(),
        model.sample_count(),
        2 * config.alphabet.len(),
    );

    // Every group holds exactly one value per calibration slice; quantiles
    // show how presence pools sit far above absence complements.
    println!("\n{:>5} {:>8} {:>10} {:>10} {:>10}", "class", "polarity", "p10", "median", "p90");
    for label in config.alphabet.labels() {
        for polarity in [Polarity::Present, Polarity::Absent] {
            let values = model.group(label, polarity)?.values();
            let q = |f: f64| values[((values.len() - 1) as f64 * f) as usize];
            println!(
                "{:>5} {:>8} {:>10.4} {:>10.4} {:>10.4}",
                config.alphabet.name(label),
                polarity,
                q(0.1),
                q(0.5),
                q(0.9),
            );
        }
    }

    // Scoring a probe returns the fraction of the pool strictly below it.
    let label = config.alphabet.require("IPH")?;
    println!("\nconformal scores for IPH presence probes:");
    for probe in [0.05, 0.25, 0.5, 0.75, 0.95] {
        println!(
            "  confidence {probe:.2} -> score {:.3}",
            model.conformal_score(label, Polarity::Present, probe)?
        );
    }

    // Ties share a rank: a probe equal to a pooled value counts only the
    // values strictly below it.
    let pool = model.group(label, Polarity::Present)?.values();
    let existing = pool[pool.len() / 2];
    println!(
        "probe equal to a pooled value {existing:.4} -> score {:.3}",
        model.conformal_score(label, Polarity::Present, existing)?
    );
    Ok(())
}
