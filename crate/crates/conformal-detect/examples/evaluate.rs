//! Score prediction sets under the five counting regimes.
//!
//! The same results are counted five ways: per assertion with and without
//! localization, per cluster, per image-class pair, and per image with
//! exact-set matching. Derived rates stay `None` where a regime leaves a
//! count undefined. Also reports mean average precision over asserted boxes
//! and how sharply the challenging flag separates generator-ambiguous
//! slices from clean ones.
//!
//! Run with: cargo run --release --example evaluate

use conformal_detect::calibration::calibrate;
use conformal_detect::inference::infer;
use conformal_detect::metrics::{
    mean_average_precision, score_dataset, two_proportion_test, MatchSpec, Regime,
};
use conformal_detect::simulator::{generate, SimConfig};
use conformal_detect::Result;

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

fn main() -> Result<()> {
    let config = SimConfig {
        seed: 5,
        n_samples: 1500,
        class_priors: vec![0.18; 5],
        ambiguity_rate: 0.2,
        ..SimConfig::default()
    };
    let calibration = generate(&config)?;
    let model = calibrate(&calibration.samples, &config.alphabet)?;
    let test = generate(&SimConfig { seed: 6, ..config.clone() })?;

    let results = test
        .samples
        .iter()
        .map(|s| infer(s, &model, 0.5, 0.5))
        .collect::<Result<Vec<_>>>()?;
    let truths: Vec<_> = test
        .samples
        .iter()
        .map(|s| s.ground_truth.clone().expect("simulated slices carry truth"))
        .collect();

    println!(
        "{:<26} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "regime", "tp", "fp", "tn", "fn", "sens", "spec", "ppv", "npv", "f1",
    );
    for &regime in &Regime::ALL {
        let counts = score_dataset(&results, &truths, &config.alphabet, MatchSpec::default_for(regime))?;
        let report = conformal_detect::metrics::EvaluationReport::new(regime, 0.5, 0.5, counts);
        println!(
            "{:<26} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7}",
            regime.to_string(),
            report.counts.tp,
            report.counts.fp,
            report.counts.tn.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            report.counts.fn_.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            fmt(report.metrics.sensitivity),
            fmt(report.metrics.specificity),
            fmt(report.metrics.ppv),
            fmt(report.metrics.npv),
            fmt(report.metrics.f1),
        );
    }

    let ap = mean_average_precision(&results, &truths, &config.alphabet, 0.5)?;
    println!("\nmean average precision @ IoU 0.5: {}", fmt(ap.mean));
    for (c, per_class) in ap.per_class.iter().enumerate() {
        println!("  {}: {}", config.alphabet.names()[c], fmt(*per_class));
    }

    // How well does the contradiction flag recover injected ambiguity?
    let mut flagged = [0u64; 2];
    let mut totals = [0u64; 2];
    for (r, t) in results.iter().zip(&test.generator_truth) {
        let bucket = usize::from(t.ambiguous);
        totals[bucket] += 1;
        flagged[bucket] += u64::from(r.challenging);
    }
    let p = two_proportion_test(flagged[1], totals[1], flagged[0], totals[0])?;
    println!(
        "\nchallenging flag: {:.3} of ambiguous vs {:.3} of clean slices (p = {p:.2e})",
        flagged[1] as f64 / totals[1] as f64,
        flagged[0] as f64 / totals[0] as f64,
    );
    Ok(())
}
