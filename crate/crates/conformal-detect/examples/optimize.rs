//! Sweep the threshold grid and pick operating points.
//!
//! Every (IoU, conformal) pair is scored under each requested counting
//! regime. Regimes with defined negatives select by ROC area across
//! conformal thresholds (then Youden's J within the winning IoU row);
//! regimes without negatives select by positive predictive value.
//!
//! Run with: cargo run --release --example optimize

use conformal_detect::calibration::calibrate;
use conformal_detect::metrics::{MatchSpec, Regime};
use conformal_detect::optimizer::{select_by_auroc, select_by_ppv, sweep, ThresholdGrid};
use conformal_detect::simulator::{generate, SimConfig};
use conformal_detect::Result;

fn main() -> Result<()> {
    let config = SimConfig {
        seed: 3,
        n_samples: 600,
        class_priors: vec![0.15; 5],
        ambiguity_rate: 0.1,
        ..SimConfig::default()
    };
    let calibration = generate(&config)?;
    let model = calibrate(&calibration.samples, &config.alphabet)?;
    let tuning = generate(&SimConfig { seed: 4, ..config })?;

    let grid = ThresholdGrid::new(
        vec![0.3, 0.5, 0.7],
        (0..=10).map(|k| k as f64 / 10.0).collect(),
    )?;
    let specs: Vec<MatchSpec> = Regime::ALL.iter().map(|&r| MatchSpec::default_for(r)).collect();
    let cells = sweep(&tuning.samples, &model, &grid, &specs)?;
    println!(
        "swept {} cells ({} x {}) under {} regimes",
        cells.len(),
        grid.iou_values().len(),
        grid.conformal_values().len(),
        specs.len(),
    );

    // One conformal slice of the grid, to see the counts move.
    println!("\nper-assertion counts with localization, IoU 0.5:");
    println!("{:>10} {:>6} {:>6} {:>6} {:>6}", "conformal", "tp", "fp", "tn", "fn");
    for cell in cells.iter().filter(|c| c.iou_threshold == 0.5) {
        let r = &cell.reports[&Regime::MatrixA];
        println!(
            "{:>10.1} {:>6} {:>6} {:>6} {:>6}",
            cell.conformal_threshold,
            r.counts.tp,
            r.counts.fp,
            r.counts.tn.unwrap_or_default(),
            r.counts.fn_.unwrap_or_default(),
        );
    }

    println!("\nselected operating points:");
    for &regime in &Regime::ALL {
        let (method, pick) = match regime {
            Regime::MatrixC | Regime::ExtExactClassification => {
                ("ppv  ", select_by_ppv(&cells, regime)?)
            }
            _ => ("auroc", select_by_auroc(&cells, regime)?),
        };
        println!(
            "  {regime:<24} by {method}: iou {:.2}, conformal {:.2} (value {:.4})",
            pick.iou_threshold, pick.conformal_threshold, pick.value,
        );
    }
    Ok(())
}
