//! Map raw CT attenuation values to display bytes with level/width windows.
//!
//! A window (level L, width W) linearly maps [L - W/2, L + W/2] onto 0..=255
//! and saturates outside it. Detector preprocessing pipelines stack several
//! windows as channels; this shows the standard head-CT trio.
//!
//! Run with: cargo run --example windowing

use ndarray::Array2;

use conformal_detect::windowing::{window_hu, window_value, WindowSpec};
use conformal_detect::Result;

fn main() -> Result<()> {
    let windows = [
        ("brain", WindowSpec::new(40.0, 80.0)?),
        ("subdural", WindowSpec::new(75.0, 215.0)?),
        ("bone", WindowSpec::new(600.0, 2800.0)?),
    ];

    // Representative attenuation values in Hounsfield units.
    let tissue = [
        ("air", -1000.0),
        ("fat", -60.0),
        ("white matter", 25.0),
        ("gray matter", 38.0),
        ("acute blood", 65.0),
        ("bone", 700.0),
    ];

    println!("{:<14} {:>8} {:>9} {:>9} {:>6}", "tissue", "HU", "brain", "subdural", "bone");
    for (name, hu) in tissue {
        let row: Vec<String> = windows
            .iter()
            .map(|(_, w)| format!("{:>3}", window_value(hu, w)))
            .collect();
        println!("{name:<14} {hu:>8.0} {:>9} {:>9} {:>6}", row[0], row[1], row[2]);
    }

    // Whole-array mapping keeps the shape and rejects non-finite pixels.
    let pixels = Array2::from_shape_fn((4, 4), |(r, c)| (r * 4 + c) as f64 * 10.0 - 20.0);
    let mapped = window_hu(&pixels, &windows[0].1)?;
    println!("\n4x4 ramp under the brain window:");
    for row in mapped.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>3}")).collect();
        println!("  {}", cells.join(" "));
    }

    let bad = Array2::from_elem((2, 2), f64::NAN);
    assert!(window_hu(&bad, &windows[0].1).is_err());
    println!("\nnon-finite input is rejected rather than silently saturated");
    Ok(())
}
