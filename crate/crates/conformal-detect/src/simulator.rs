//! Synthetic-detector oracle for end-to-end verification.
//!
//! The simulator stands in for a trained detector plus annotators: it draws
//! corpora whose detection confidences follow a known generative model, so
//! conformal coverage, challenging-flag behavior, and the split machinery
//! can be verified against closed-form expectations without any real model.
//!
//! Per sample, with a single RNG stream in a documented order:
//!
//! 1. Draw the primary class from `class_priors`; leftover probability mass
//!    yields a negative sample.
//! 2. Draw patient/series ids when `n_patients > 0` (three series nest under
//!    each patient).
//! 3. Positive samples get a ground-truth box and a detection at the same
//!    coordinates whose confidence is `sigmoid(2 + noise · L)`, `L` a
//!    standard logistic draw. Every other class emits one low-confidence
//!    candidate, `sigmoid(-2 + noise · L)`, at a random location — the
//!    forced-emission behavior calibration expects.
//! 4. With probability `ambiguity_rate`, a positive sample turns ambiguous:
//!    one other class's candidate is replaced by a box jittered from the
//!    primary (small shift and rescale, heavy overlap) with near-equal
//!    confidence.
//! 5. `Poisson(clutter_rate)` extra spurious low-confidence boxes.
//! 6. Three pseudo-readers mirror the ground truth; on ambiguous samples the
//!    third reader also marks the secondary class present, so reader
//!    disagreement tracks injected ambiguity.
//!
//! Detections are emitted class by class (clutter appended last), and ids
//! embed the seed, so a corpus is a pure function of its configuration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, ClassLabel, Polarity};
use crate::calibration::CalibrationModel;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::inference::{build_clusters, conformalize};
use crate::sample::{Detection, GroundTruthLabel, ReaderOpinion, Sample};

/// Full description of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub alphabet: Alphabet,
    /// Probability that a sample's primary finding is each class, aligned
    /// with the alphabet. The sum may be below 1; the remainder is the
    /// probability of a negative sample.
    pub class_priors: Vec<f64>,
    pub image_size: (u32, u32),
    /// Standard deviation of the logit-space confidence noise.
    pub confidence_noise: f64,
    /// Probability that a positive sample carries a second overlapping
    /// class with near-equal confidence.
    pub ambiguity_rate: f64,
    /// Expected count of spurious low-confidence boxes per sample.
    pub clutter_rate: f64,
    /// When non-zero, samples are grouped under this many patients.
    pub n_patients: usize,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        let alphabet = Alphabet::default();
        let k = alphabet.len();
        SimConfig {
            seed: 0,
            n_samples: 1000,
            class_priors: vec![1.0 / k as f64; k],
            alphabet,
            image_size: (512, 512),
            confidence_noise: 1.0,
            ambiguity_rate: 0.3,
            clutter_rate: 0.0,
            n_patients: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidSimConfig("n_samples must be at least 1".into()));
        }
        if self.class_priors.len() != self.alphabet.len() {
            return Err(Error::InvalidSimConfig(format!(
                "{} priors for {} classes",
                self.class_priors.len(),
                self.alphabet.len()
            )));
        }
        if self.class_priors.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidSimConfig(
                "class priors must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = self.class_priors.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidSimConfig(
                "every class has zero probability".into(),
            ));
        }
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidSimConfig(format!(
                "class priors sum to {total}, above 1"
            )));
        }
        if !(0.0..=1.0).contains(&self.ambiguity_rate) {
            return Err(Error::InvalidSimConfig(
                "ambiguity_rate must lie in [0, 1]".into(),
            ));
        }
        if !self.clutter_rate.is_finite() || self.clutter_rate < 0.0 {
            return Err(Error::InvalidSimConfig(
                "clutter_rate must be a finite non-negative expectation".into(),
            ));
        }
        if !self.confidence_noise.is_finite() || self.confidence_noise < 0.0 {
            return Err(Error::InvalidSimConfig(
                "confidence_noise must be finite and non-negative".into(),
            ));
        }
        if self.image_size.0.min(self.image_size.1) < 32 {
            return Err(Error::InvalidSimConfig(
                "image must be at least 32 pixels on each side".into(),
            ));
        }
        Ok(())
    }
}

/// What the generator intended for one sample, kept aside from the sample
/// itself so evaluation can compare prediction behavior against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub slice_id: String,
    /// Primary class name; `None` for negative samples.
    pub primary: Option<String>,
    /// Secondary class name on ambiguous samples.
    pub secondary: Option<String>,
    pub ambiguous: bool,
}

/// A generated corpus with its per-sample generator record.
#[derive(Debug, Clone, PartialEq)]
pub struct SimCorpus {
    pub samples: Vec<Sample>,
    pub generator_truth: Vec<SimTruth>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Standard logistic draw via inverse transform.
fn logistic_draw(rng: &mut ChaCha8Rng) -> f64 {
    logit(rng.random::<f64>())
}

fn random_box(rng: &mut ChaCha8Rng, image: (u32, u32)) -> BBox {
    let (wmax, hmax) = (image.0 as f64, image.1 as f64);
    let min_dim = wmax.min(hmax);
    let w = rng.random_range(0.05..0.2) * min_dim;
    let h = rng.random_range(0.05..0.2) * min_dim;
    let x = rng.random_range(0.0..(wmax - w));
    let y = rng.random_range(0.0..(hmax - h));
    BBox::new(x, y, x + w, y + h).expect("generated box is ordered and finite")
}

/// A heavily overlapping copy of `base`: center shifted up to 8% of the box
/// size per axis, sides rescaled up to 10%, clamped to the image.
fn jittered_box(rng: &mut ChaCha8Rng, base: &BBox, image: (u32, u32)) -> BBox {
    let (x1, y1, x2, y2) = (base.x1(), base.y1(), base.x2(), base.y2());
    let (w, h) = (x2 - x1, y2 - y1);
    let (cx, cy) = ((x1 + x2) / 2.0, (y1 + y2) / 2.0);
    let dx = rng.random_range(-0.08..0.08) * w;
    let dy = rng.random_range(-0.08..0.08) * h;
    let fw = 1.0 + rng.random_range(-0.1..0.1);
    let fh = 1.0 + rng.random_range(-0.1..0.1);
    let (nw, nh) = (w * fw, h * fh);
    let nx1 = (cx + dx - nw / 2.0).max(0.0);
    let ny1 = (cy + dy - nh / 2.0).max(0.0);
    let nx2 = (nx1 + nw).min(image.0 as f64);
    let ny2 = (ny1 + nh).min(image.1 as f64);
    BBox::new(nx1, ny1, nx2.max(nx1), ny2.max(ny1)).expect("jittered box is ordered")
}

/// Generates a corpus; a pure function of the configuration.
pub fn generate(config: &SimConfig) -> Result<SimCorpus> {
    config.validate()?;
    let alphabet = &config.alphabet;
    let k = alphabet.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let clutter = if config.clutter_rate > 0.0 {
        Some(Poisson::new(config.clutter_rate).expect("validated positive rate"))
    } else {
        None
    };

    let mut samples = Vec::with_capacity(config.n_samples);
    let mut generator_truth = Vec::with_capacity(config.n_samples);
    for i in 0..config.n_samples {
        let slice_id = format!("s{}-{:06}", config.seed, i);

        let primary: Option<ClassLabel> = {
            let u = rng.random::<f64>();
            let mut cumulative = 0.0;
            let mut chosen = None;
            for (c, &p) in config.class_priors.iter().enumerate() {
                cumulative += p;
                if u < cumulative {
                    chosen = alphabet.labels().nth(c);
                    break;
                }
            }
            chosen
        };

        let (patient_id, series_id) = if config.n_patients > 0 {
            let p = rng.random_range(0..config.n_patients);
            let v = rng.random_range(0..3u32);
            (
                format!("p{}-{:04}", config.seed, p),
                format!("r{}-{:04}-{}", config.seed, p, v),
            )
        } else {
            (String::new(), String::new())
        };
        let mut sample = Sample::new(slice_id.clone(), series_id, patient_id);

        let primary_box = primary.map(|label| {
            let bbox = random_box(&mut rng, config.image_size);
            let conf = sigmoid(2.0 + config.confidence_noise * logistic_draw(&mut rng));
            (label, bbox, conf)
        });

        let (ambiguous, secondary) = match &primary_box {
            Some((label, bbox, conf)) if rng.random::<f64>() < config.ambiguity_rate => {
                let other = rng.random_range(0..k - 1);
                let index = if other >= label.index() { other + 1 } else { other };
                let secondary_label = alphabet.labels().nth(index).expect("index below k");
                let sbox = jittered_box(&mut rng, bbox, config.image_size);
                let sconf = sigmoid(logit(*conf) + 0.2 * logistic_draw(&mut rng));
                (true, Some((secondary_label, sbox, sconf)))
            }
            _ => (false, None),
        };

        // One candidate per class, in class order.
        for label in alphabet.labels() {
            let detection = if let Some((p, bbox, conf)) = primary_box
                .as_ref()
                .filter(|(p, _, _)| *p == label)
            {
                debug_assert_eq!(p, &label);
                Detection::new(bbox.clone(), label, *conf)
            } else if let Some((s, bbox, conf)) =
                secondary.as_ref().filter(|(s, _, _)| *s == label)
            {
                debug_assert_eq!(s, &label);
                Detection::new(bbox.clone(), label, *conf)
            } else {
                let bbox = random_box(&mut rng, config.image_size);
                let conf = sigmoid(-2.0 + config.confidence_noise * logistic_draw(&mut rng));
                Detection::new(bbox, label, conf)
            };
            sample.detections.push(detection.expect("confidence is a sigmoid output"));
        }
        if let Some(poisson) = &clutter {
            let extras = poisson.sample(&mut rng) as usize;
            for _ in 0..extras {
                let label = alphabet
                    .labels()
                    .nth(rng.random_range(0..k))
                    .expect("index below k");
                let bbox = random_box(&mut rng, config.image_size);
                let conf = sigmoid(-3.0 + config.confidence_noise * logistic_draw(&mut rng));
                sample
                    .detections
                    .push(Detection::new(bbox, label, conf).expect("confidence is a sigmoid output"));
            }
        }

        sample.ground_truth = Some(match &primary_box {
            Some((label, bbox, _)) => vec![GroundTruthLabel::new(
                *label,
                Polarity::Present,
                vec![bbox.clone()],
            )?],
            None => Vec::new(),
        });

        let truth_polarity: Vec<Polarity> = alphabet
            .labels()
            .map(|l| {
                if primary_box.as_ref().is_some_and(|(p, _, _)| *p == l) {
                    Polarity::Present
                } else {
                    Polarity::Absent
                }
            })
            .collect();
        let readers = (0..3)
            .map(|r| {
                let mut labels = truth_polarity.clone();
                if r == 2 {
                    if let Some((s, _, _)) = &secondary {
                        labels[s.index()] = Polarity::Present;
                    }
                }
                ReaderOpinion::new(format!("reader-{}", r + 1), labels, alphabet)
            })
            .collect::<Result<Vec<_>>>()?;
        sample.readers = Some(readers);

        generator_truth.push(SimTruth {
            slice_id,
            primary: primary.map(|l| alphabet.name(l).to_string()),
            secondary: secondary.as_ref().map(|(s, _, _)| alphabet.name(*s).to_string()),
            ambiguous,
        });
        samples.push(sample);
    }
    Ok(SimCorpus {
        samples,
        generator_truth,
    })
}

/// Empirical inclusion of the true presence label at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub conformal_threshold: f64,
    /// Positive samples whose prediction sets contain their primary class.
    pub included: usize,
    /// Positive samples probed.
    pub positives: usize,
    /// `included / positives` (0 when the corpus has no positives).
    pub inclusion_rate: f64,
}

/// Measures, for each conformal threshold, how often the prediction sets of
/// positive samples contain the generator's primary `(class, Present)` pair.
///
/// The model must come from a disjoint corpus drawn from the same
/// configuration for the rates to track `1 - threshold`.
pub fn coverage_probe(
    corpus: &SimCorpus,
    model: &CalibrationModel,
    iou_threshold: f64,
    conformal_values: &[f64],
) -> Result<Vec<CoveragePoint>> {
    let alphabet = model.alphabet();
    let clustered: Vec<_> = corpus
        .samples
        .iter()
        .map(|s| build_clusters(&s.detections, alphabet, iou_threshold))
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(conformal_values.len());
    for &t in conformal_values {
        let mut positives = 0usize;
        let mut included = 0usize;
        for (truth, clusters) in corpus.generator_truth.iter().zip(&clustered) {
            let Some(primary) = truth.primary.as_deref() else {
                continue;
            };
            let label = alphabet.require(primary)?;
            positives += 1;
            let hit = clusters.iter().try_fold(false, |found, cluster| {
                if found {
                    return Ok::<bool, Error>(true);
                }
                let scored = conformalize(cluster, model, t)?;
                Ok(scored
                    .prediction_set
                    .iter()
                    .any(|e| e.label == label && e.polarity == Polarity::Present))
            })?;
            if hit {
                included += 1;
            }
        }
        points.push(CoveragePoint {
            conformal_threshold: t,
            included,
            positives,
            inclusion_rate: if positives == 0 {
                0.0
            } else {
                included as f64 / positives as f64
            },
        });
    }
    Ok(points)
}
