//! Trapezoidal area under an ROC polyline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve, with a flag raised when the input carried no
/// information beyond the forced endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocArea {
    pub area: f64,
    /// True when the polyline collapsed to the chance diagonal because no
    /// interior operating point survived deduplication.
    pub degenerate: bool,
}

/// Computes the trapezoidal area under the `(fpr, tpr)` points.
///
/// The endpoints `(0, 0)` and `(1, 1)` are appended before sorting, and
/// points sharing a false-positive rate are collapsed to the one with the
/// highest true-positive rate, so duplicated or same-`fpr` dominated points
/// never change the area. Every coordinate must be a rate in `[0, 1]`.
pub fn auroc(points: &[(f64, f64)]) -> Result<RocArea> {
    for &(fpr, tpr) in points {
        if !(0.0..=1.0).contains(&fpr) || !(0.0..=1.0).contains(&tpr) {
            return Err(Error::InvalidInput(format!(
                "ROC point ({fpr}, {tpr}) is not a pair of rates in [0, 1]"
            )));
        }
    }
    let mut augmented: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    augmented.push((0.0, 0.0));
    augmented.extend_from_slice(points);
    augmented.push((1.0, 1.0));
    augmented.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // Keep the highest tpr per fpr; the sort put it last in each run.
    let mut polyline: Vec<(f64, f64)> = Vec::with_capacity(augmented.len());
    for p in augmented {
        match polyline.last_mut() {
            Some(last) if last.0 == p.0 => *last = p,
            _ => polyline.push(p),
        }
    }

    let area = polyline
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    let degenerate = polyline == [(0.0, 0.0), (1.0, 1.0)];
    Ok(RocArea { area, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_classifier_scores_one() {
        let r = auroc(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]).unwrap();
        assert_eq!(r.area, 1.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn chance_diagonal_scores_half() {
        let r = auroc(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(r.area, 0.5);
        assert!(r.degenerate);
    }

    #[test]
    fn single_operating_point_forms_two_trapezoids() {
        let r = auroc(&[(0.2, 0.6)]).unwrap();
        assert!((r.area - 0.7).abs() < 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn empty_input_degenerates_to_half() {
        let r = auroc(&[]).unwrap();
        assert_eq!(r.area, 0.5);
        assert!(r.degenerate);
    }

    #[test]
    fn non_finite_and_out_of_range_points_are_rejected() {
        assert!(auroc(&[(f64::NAN, 0.5)]).is_err());
        assert!(auroc(&[(0.5, f64::INFINITY)]).is_err());
        assert!(auroc(&[(1.2, 0.5)]).is_err());
        assert!(auroc(&[(0.5, -0.1)]).is_err());
    }

    proptest! {
        #[test]
        fn area_is_invariant_under_reordering(
            mut points in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..20),
            swaps in proptest::collection::vec((0usize..20, 0usize..20), 0..10),
        ) {
            let original = auroc(&points).unwrap();
            for (i, j) in swaps {
                if i < points.len() && j < points.len() {
                    points.swap(i, j);
                }
            }
            let shuffled = auroc(&points).unwrap();
            prop_assert_eq!(original, shuffled);
        }

        #[test]
        fn same_fpr_dominated_point_never_changes_the_area(
            points in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..20),
            pick in 0usize..20,
            shrink in 0.0f64..=1.0,
        ) {
            let base = auroc(&points).unwrap();
            let (fpr, tpr) = points[pick % points.len()];
            let mut extended = points.clone();
            extended.push((fpr, tpr * shrink));
            let with_dominated = auroc(&extended).unwrap();
            prop_assert!((base.area - with_dominated.area).abs() < 1e-12);
        }

        #[test]
        fn area_is_always_a_rate(
            points in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..30),
        ) {
            let r = auroc(&points).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.area));
        }
    }
}
