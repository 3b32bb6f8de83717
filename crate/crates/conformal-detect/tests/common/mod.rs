//! Shared helpers for the integration suites: an independent reference
//! implementation of clustering (kept free of library geometry and types so
//! it can serve as an oracle) plus fixture corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use conformal_detect::{Alphabet, BBox, Detection, Polarity, Sample};
use conformal_detect::sample::GroundTruthLabel;

/// A raw clustering instance: parallel arrays, no library types.
#[derive(Debug, Clone)]
pub struct RawInstance {
    pub boxes: Vec<[f64; 4]>,
    pub classes: Vec<usize>,
    pub confidences: Vec<f64>,
    pub class_count: usize,
}

/// A cluster in the reference output: indices into the instance arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefCluster {
    pub delimiter: usize,
    /// One slot per class, holding the index of the condensed member.
    pub condensed: Vec<Option<usize>>,
}

fn ref_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let width = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let height = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = width * height;
    let area_a = (a[2] - a[0]) * (a[3] - a[1]);
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Brute-force clustering, written against the procedure directly:
///
/// 1. keep the most confident box of every class (earliest on ties);
/// 2. order the kept boxes by confidence, class index breaking ties;
/// 3. a kept box becomes a new cluster delimiter unless it overlaps an
///    earlier delimiter at the threshold, in which case it joins the first
///    such cluster;
/// 4. every remaining box, in input order, joins the first cluster whose
///    delimiter it overlaps, or is dropped;
/// 5. each cluster condenses to one box per class — the delimiter for its
///    own class, and for every other class the most confident member, with
///    earlier attachment winning ties.
pub fn reference_clusters(instance: &RawInstance, threshold: f64) -> Vec<RefCluster> {
    let RawInstance {
        boxes,
        classes,
        confidences,
        class_count,
    } = instance;
    let n = boxes.len();

    let mut top: Vec<Option<usize>> = vec![None; *class_count];
    for i in 0..n {
        let slot = &mut top[classes[i]];
        *slot = match *slot {
            Some(j) if confidences[i] > confidences[j] => Some(i),
            Some(j) => Some(j),
            None => Some(i),
        };
    }

    let mut kept: Vec<usize> = top.iter().copied().flatten().collect();
    kept.sort_by(|&a, &b| {
        confidences[b]
            .total_cmp(&confidences[a])
            .then(classes[a].cmp(&classes[b]))
    });

    let mut delimiters: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for &s in &kept {
        let mut joined = false;
        for (c, &d) in delimiters.iter().enumerate() {
            if ref_iou(&boxes[s], &boxes[d]) >= threshold {
                members[c].push(s);
                joined = true;
                break;
            }
        }
        if !joined {
            delimiters.push(s);
            members.push(Vec::new());
        }
    }

    for i in 0..n {
        if kept.contains(&i) {
            continue;
        }
        for (c, &d) in delimiters.iter().enumerate() {
            if ref_iou(&boxes[i], &boxes[d]) >= threshold {
                members[c].push(i);
                break;
            }
        }
    }

    delimiters
        .iter()
        .zip(&members)
        .map(|(&d, attached)| {
            let mut condensed: Vec<Option<usize>> = vec![None; *class_count];
            condensed[classes[d]] = Some(d);
            for &m in attached {
                let slot = &mut condensed[classes[m]];
                let wins = match *slot {
                    Some(held) => confidences[m] > confidences[held],
                    None => true,
                };
                if wins {
                    *slot = Some(m);
                }
            }
            RefCluster {
                delimiter: d,
                condensed,
            }
        })
        .collect()
}

/// Draws a clustering instance on a coarse lattice so overlaps, exact
/// corner coincidences, and confidence ties all occur.
pub fn random_instance(rng: &mut ChaCha8Rng, max_boxes: usize, class_count: usize) -> RawInstance {
    let n = rng.random_range(0..=max_boxes);
    let mut boxes = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    let mut confidences = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.random_range(0..20) as f64 * 10.0;
        let y1 = rng.random_range(0..20) as f64 * 10.0;
        let w = rng.random_range(1..=15) as f64 * 10.0;
        let h = rng.random_range(1..=15) as f64 * 10.0;
        boxes.push([x1, y1, x1 + w, y1 + h]);
        classes.push(rng.random_range(0..class_count));
        // 21 levels force plenty of exact ties.
        confidences.push(rng.random_range(0..=20) as f64 / 20.0);
    }
    RawInstance {
        boxes,
        classes,
        confidences,
        class_count,
    }
}

/// Converts a raw instance into library detections.
pub fn instance_detections(instance: &RawInstance, alphabet: &Alphabet) -> Vec<Detection> {
    instance
        .boxes
        .iter()
        .zip(&instance.classes)
        .zip(&instance.confidences)
        .map(|((b, &c), &conf)| {
            let label = alphabet.labels().nth(c).expect("class index within alphabet");
            Detection::new(BBox::new(b[0], b[1], b[2], b[3]).unwrap(), label, conf).unwrap()
        })
        .collect()
}

/// A single-class corpus whose calibration pool is an even lattice and whose
/// test slices are perfectly separable: positives at confidence 0.9,
/// negatives at 0.15.
pub fn separable_fixture(alphabet: &Alphabet) -> (Vec<Sample>, Vec<Sample>) {
    let label = alphabet.require("IPH").unwrap();
    let bbox = || BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
    let cal = (0..12)
        .map(|i| {
            let mut s = Sample::new(format!("cal-{i}"), "r", "p");
            s.detections
                .push(Detection::new(bbox(), label, (i + 1) as f64 / 13.0).unwrap());
            s
        })
        .collect();
    let test = (0..10)
        .map(|i| {
            let mut s = Sample::new(format!("test-{i}"), "r", "p");
            let positive = i % 2 == 0;
            s.detections
                .push(Detection::new(bbox(), label, if positive { 0.9 } else { 0.15 }).unwrap());
            s.ground_truth = Some(if positive {
                vec![GroundTruthLabel::new(label, Polarity::Present, vec![bbox()]).unwrap()]
            } else {
                vec![]
            });
            s
        })
        .collect();
    (cal, test)
}

/// Seeded RNG for oracle draws.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
