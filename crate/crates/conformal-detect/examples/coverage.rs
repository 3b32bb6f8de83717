//! Verify the calibration guarantee empirically.
//!
//! Calibrate on one corpus, then measure on a second, disjoint corpus drawn
//! from the same distribution how often each slice's true class survives in
//! the prediction set. Under exchangeability the inclusion rate at
//! threshold t must track 1 - t — that is the distribution-free guarantee,
//! and this example checks it end to end through clustering, condensing,
//! and rank scoring.
//!
//! Run with: cargo run --release --example coverage

use conformal_detect::calibration::calibrate;
use conformal_detect::simulator::{coverage_probe, generate, SimConfig};
use conformal_detect::Result;

fn main() -> Result<()> {
    let config = SimConfig {
        seed: 1,
        n_samples: 4000,
        // Every slice positive for one class keeps the probe exact.
        class_priors: vec![1.0, 0.0, 0.0, 0.0, 0.0],
        ambiguity_rate: 0.0,
        ..SimConfig::default()
    };

    let calibration = generate(&config)?;
    let model = calibrate(&calibration.samples, &config.alphabet)?;
    let test = generate(&SimConfig { seed: 2, ..config })?;

    let thresholds: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let points = coverage_probe(&test, &model, 0.5, &thresholds)?;

    println!("calibration: {} slices   test: {} slices", 4000, 4000);
    println!("\n{:>10} {:>10} {:>10} {:>10}", "threshold", "included", "rate", "target");
    let mut worst: f64 = 0.0;
    for p in &points {
        let target = 1.0 - p.conformal_threshold;
        worst = worst.max((p.inclusion_rate - target).abs());
        println!(
            "{:>10.2} {:>10} {:>10.4} {:>10.2}",
            p.conformal_threshold, p.included, p.inclusion_rate, target,
        );
    }
    println!("\nlargest deviation from 1 - t: {worst:.4}");
    assert!(
        worst < 0.03,
        "coverage drifted from its guarantee; the rank machinery is broken"
    );
    Ok(())
}
