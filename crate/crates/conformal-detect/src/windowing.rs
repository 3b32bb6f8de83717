//! Hounsfield-unit intensity windowing.
//!
//! Maps raw HU values onto display bytes: values at or below
//! `level − width/2` become 0, values at or above `level + width/2` become
//! 255, and the window interior is scaled linearly with round-half-up
//! quantization. The default brain-hemorrhage window is level 50 / width 80.

use ndarray::Array2;

use crate::error::{Error, Result};

/// An intensity window described by its center (`level`) and extent (`width`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    level: f64,
    width: f64,
}

impl WindowSpec {
    pub fn new(level: f64, width: f64) -> Result<Self> {
        if !level.is_finite() || !width.is_finite() || width <= 0.0 {
            return Err(Error::InvalidWindowWidth(width));
        }
        Ok(WindowSpec { level, width })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Lower edge of the window, `level − width/2`.
    pub fn lower(&self) -> f64 {
        self.level - self.width / 2.0
    }
}

/// Windows a single finite HU value to a display byte.
pub fn window_value(value: f64, spec: &WindowSpec) -> u8 {
    let t = ((value - spec.lower()) / spec.width).clamp(0.0, 1.0);
    // `f64::round` rounds halves away from zero, which is round-half-up for
    // the non-negative values produced here.
    (255.0 * t).round() as u8
}

/// Windows a 2-D array of HU values; output shape equals input shape.
///
/// Rejects non-finite input values, naming the offending position.
pub fn window_hu(pixels: &Array2<f64>, spec: &WindowSpec) -> Result<Array2<u8>> {
    for ((row, col), &v) in pixels.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinitePixel { row, col });
        }
    }
    Ok(pixels.map(|&v| window_value(v, spec)))
}
