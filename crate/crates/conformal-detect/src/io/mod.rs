//! File formats: JSON-lines datasets and results, the JSON model file, and
//! the CSV threshold grid.
//!
//! Every reader reports failures as `path:line` so a bad record in a large
//! corpus is findable, and every writer emits LF-terminated UTF-8 with a
//! deterministic field order, so identical inputs produce byte-identical
//! files.

pub mod dataset;
pub mod model;
pub mod results;

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

/// The SHA-256 of a file's bytes, hex-encoded.
pub fn sha256_hex(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buffer = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buffer)?;
        if n == 0 {
            break;
        }
        hasher.update(&buffer[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    Ok(hex)
}

/// Identifies an input file by basename and content digest. Basenames keep
/// manifests byte-stable across working directories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<FileDigest> {
        let file = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(FileDigest {
            file,
            sha256: sha256_hex(path)?,
        })
    }
}
