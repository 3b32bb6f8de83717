//! Distribution-free uncertainty for object-detection outputs.
//!
//! Given per-class detection candidates from any detector, this crate turns
//! raw confidences into *prediction sets* with a calibrated error rate: a
//! set that asserts `(class, present)` or `(class, absent)` only when a
//! held-out calibration corpus supports the claim at the requested level.
//! Because calibration is Mondrian — one value pool per `(class, polarity)`
//! group — the guarantee holds per class and per polarity, not just on
//! average over a corpus.
//!
//! The pieces, in pipeline order:
//!
//! - [`datasplit`] routes samples by multi-reader consensus and splits the
//!   unanimous part into leakage-free subsets by patient/series group.
//! - [`calibration`] builds the per-group value pools and scores new
//!   confidences by rank.
//! - [`inference`] groups overlapping boxes into clusters around class-wise
//!   top detections, condenses each cluster to one candidate per class,
//!   attaches scored prediction sets, and flags contradictory slices as
//!   challenging.
//! - [`metrics`] counts confusion matrices under five regimes, derives rates,
//!   and offers ROC area, average precision, and a two-proportion test.
//! - [`optimizer`] sweeps an IoU x conformal threshold grid and picks
//!   operating points.
//! - [`simulator`] draws synthetic corpora with known generative truth so
//!   every stage can be verified against closed-form expectations.
//! - [`io`] and [`commands`] wrap the pipeline in stable file formats and
//!   six end-to-end operations.
//!
//! ```
//! use conformal_detect::{Alphabet, Polarity};
//! use conformal_detect::calibration::calibrate;
//! use conformal_detect::geometry::BBox;
//! use conformal_detect::inference::infer;
//! use conformal_detect::sample::{Detection, Sample};
//!
//! # fn main() -> conformal_detect::Result<()> {
//! let alphabet = Alphabet::default();
//! // A toy calibration corpus: one detection per class per slice.
//! let corpus: Vec<Sample> = (0..20)
//!     .map(|i| {
//!         let mut s = Sample::new(format!("cal-{i}"), "", "");
//!         for (c, label) in alphabet.labels().enumerate() {
//!             let conf = ((i + 7 * c) % 20) as f64 / 20.0;
//!             let bbox = BBox::new(0.0, 0.0, 50.0, 50.0)?;
//!             s.detections.push(Detection::new(bbox, label, conf)?);
//!         }
//!         Ok(s)
//!     })
//!     .collect::<conformal_detect::Result<_>>()?;
//! let model = calibrate(&corpus, &alphabet)?;
//!
//! let mut slice = Sample::new("new-slice", "", "");
//! let label = alphabet.require("IPH")?;
//! slice
//!     .detections
//!     .push(Detection::new(BBox::new(10.0, 10.0, 60.0, 60.0)?, label, 0.93)?);
//! let result = infer(&slice, &model, 0.5, 0.5)?;
//! let set = &result.clusters[0].prediction_set;
//! assert!(set
//!     .iter()
//!     .any(|e| e.label == label && e.polarity == Polarity::Present));
//! # Ok(())
//! # }
//! ```

pub mod alphabet;
pub mod calibration;
pub mod commands;
pub mod datasplit;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod sample;
pub mod simulator;
pub mod windowing;

pub use alphabet::{Alphabet, ClassLabel, Polarity};
pub use calibration::{calibrate, CalibrationModel};
pub use error::{Error, Result};
pub use geometry::BBox;
pub use inference::{infer, SampleResult};
pub use sample::{Detection, Sample};
