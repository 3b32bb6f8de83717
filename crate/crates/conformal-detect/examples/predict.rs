//! Cluster overlapping detections and attach conformal prediction sets.
//!
//! Inference walks class-wise top detections in confidence order to seed
//! clusters, assigns the remaining boxes to the first cluster they overlap,
//! condenses each cluster to at most one candidate per class, then scores
//! every (class, polarity) claim against the calibration pools. A slice
//! whose sets contradict each other — two classes asserted present in one
//! cluster, or both polarities of one class — is flagged challenging.
//!
//! Run with: cargo run --example predict

use conformal_detect::calibration::calibrate;
use conformal_detect::inference::infer;
use conformal_detect::simulator::{generate, SimConfig};
use conformal_detect::{BBox, Detection, Polarity, Result, Sample};

fn main() -> Result<()> {
    let config = SimConfig {
        seed: 11,
        n_samples: 800,
        ..SimConfig::default()
    };
    let corpus = generate(&config)?;
    let alphabet = &config.alphabet;
    let model = calibrate(&corpus.samples, alphabet)?;

    // A hand-built slice: two strong overlapping candidates of different
    // classes (the interesting case), plus an unrelated weak box.
    let mut slice = Sample::new("demo", "", "");
    let mut add = |bbox: BBox, class: &str, conf: f64| -> Result<()> {
        slice
            .detections
            .push(Detection::new(bbox, alphabet.require(class)?, conf)?);
        Ok(())
    };
    add(BBox::new(100.0, 100.0, 200.0, 200.0)?, "IPH", 0.94)?;
    add(BBox::new(110.0, 95.0, 205.0, 198.0)?, "SAH", 0.90)?;
    add(BBox::new(400.0, 400.0, 450.0, 450.0)?, "IVH", 0.12)?;

    for conformal in [0.25, 0.5, 0.9] {
        let result = infer(&slice, &model, 0.5, conformal)?;
        println!(
            "\nthreshold {conformal:.2}: {} clusters, challenging = {}",
            result.clusters.len(),
            result.challenging,
        );
        for (i, cluster) in result.clusters.iter().enumerate() {
            let members: Vec<String> = cluster
                .members
                .iter()
                .flatten()
                .map(|d| format!("{} {:.2}", alphabet.name(d.label), d.confidence))
                .collect();
            println!(
                "  cluster {i}: delimiter {} [{}]",
                alphabet.name(cluster.delimiter.label),
                members.join(", "),
            );
            for e in &cluster.prediction_set {
                println!(
                    "    assert ({}, {})  score {:.3}  from confidence {:.2}",
                    alphabet.name(e.label),
                    e.polarity,
                    e.score,
                    e.source_confidence,
                );
            }
        }
    }

    // Raising the threshold can only shrink the sets: at 0.9 the overlapping
    // IPH/SAH pair usually stops contradicting because one side falls out.
    let wide = infer(&slice, &model, 0.5, 0.25)?;
    let narrow = infer(&slice, &model, 0.5, 0.9)?;
    let count = |r: &conformal_detect::SampleResult, p: Polarity| -> usize {
        r.clusters
            .iter()
            .flat_map(|c| &c.prediction_set)
            .filter(|e| e.polarity == p)
            .count()
    };
    println!(
        "\npresence assertions: {} at 0.25 vs {} at 0.90",
        count(&wide, Polarity::Present),
        count(&narrow, Polarity::Present),
    );
    Ok(())
}
