//! The calibration-model file: a single versioned JSON document holding the
//! alphabet and every per-(class, polarity) value pool, so a model trained
//! once can be shipped and reloaded bit-for-bit.
//!
//! Loading re-validates every model invariant rather than trusting the file:
//! an edited model that no longer has one group per (class, polarity) pair,
//! equal pool sizes, or in-range values is rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Polarity};
use crate::calibration::{CalibrationModel, MondrianGroup};
use crate::error::{Error, Result};

/// The only model-file layout this build reads or writes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct GroupRecord {
    class: String,
    polarity: Polarity,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelRecord {
    format_version: u32,
    alphabet: Vec<String>,
    sample_count: usize,
    created_at: String,
    groups: Vec<GroupRecord>,
}

/// Writes the model as pretty-printed JSON with a trailing newline.
pub fn write_model(path: &Path, model: &CalibrationModel) -> Result<()> {
    let record = ModelRecord {
        format_version: MODEL_FORMAT_VERSION,
        alphabet: model.alphabet().names().to_vec(),
        sample_count: model.sample_count(),
        created_at: model.created_at().to_string(),
        groups: model
            .groups()
            .map(|g| GroupRecord {
                class: model.alphabet().name(g.label()).to_string(),
                polarity: g.polarity(),
                values: g.values().to_vec(),
            })
            .collect(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &record)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Reads a model file, rejecting unknown format versions and anything that
/// fails model validation.
pub fn read_model(path: &Path) -> Result<CalibrationModel> {
    let record: ModelRecord = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if record.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelVersion {
            expected: MODEL_FORMAT_VERSION,
            found: record.format_version,
        });
    }
    let alphabet = Alphabet::new(record.alphabet)?;
    let groups = record
        .groups
        .into_iter()
        .map(|g| MondrianGroup::new(alphabet.require(&g.class)?, g.polarity, g.values))
        .collect::<Result<Vec<_>>>()?;
    CalibrationModel::from_groups(alphabet, groups, record.sample_count, record.created_at)
}
