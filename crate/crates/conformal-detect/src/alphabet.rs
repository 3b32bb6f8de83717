//! Class alphabet, interned class labels, and label polarity.
//!
//! Every label used by the toolkit is minted against an [`Alphabet`], an
//! ordered, duplicate-free list of class names. Interning labels as indices
//! keeps the hot paths allocation-free and makes "is this label a member of
//! the active alphabet" a structural guarantee rather than a runtime check
//! scattered across call sites.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a prediction-set entry (or calibration group) asserts that a class
/// is present on the slice or absent from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Present,
    Absent,
}

impl Polarity {
    /// The opposite polarity.
    pub fn complement(self) -> Self {
        match self {
            Polarity::Present => Polarity::Absent,
            Polarity::Absent => Polarity::Present,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Present => "present",
            Polarity::Absent => "absent",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A class interned against an [`Alphabet`]. Only an alphabet can mint labels,
/// so holding a `ClassLabel` implies membership in the alphabet it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel(u16);

impl ClassLabel {
    /// Position of the class within its alphabet.
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered, duplicate-free set of class names.
///
/// The default alphabet covers the five intracranial hemorrhage classes the
/// toolkit was first built around, but nothing in the pipeline depends on
/// those names: pass any alphabet to work with a different detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    /// Class names of the default five-class hemorrhage alphabet.
    pub const DEFAULT_CLASSES: [&'static str; 5] = ["IPH", "IVH", "SDH", "EDH", "SAH"];

    /// Builds an alphabet from an ordered list of names.
    ///
    /// Fails on empty input, empty names, or duplicates.
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidAlphabet("no classes given".into()));
        }
        if names.len() > u16::MAX as usize {
            return Err(Error::InvalidAlphabet(format!(
                "{} classes exceed the supported maximum",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidAlphabet(format!("class {i} has an empty name")));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidAlphabet(format!("duplicate class {name:?}")));
            }
        }
        Ok(Alphabet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// All labels of this alphabet, in order.
    pub fn labels(&self) -> impl Iterator<Item = ClassLabel> + '_ {
        (0..self.names.len() as u16).map(ClassLabel)
    }

    /// Name of a label minted by this alphabet.
    ///
    /// Panics if the label came from a larger alphabet; mixing alphabets is a
    /// programming error, not an input error.
    pub fn name(&self, label: ClassLabel) -> &str {
        &self.names[label.index()]
    }

    /// Looks a class up by name.
    pub fn label(&self, name: &str) -> Option<ClassLabel> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ClassLabel(i as u16))
    }

    /// Like [`Alphabet::label`] but fails with [`Error::UnknownClass`].
    pub fn require(&self, name: &str) -> Result<ClassLabel> {
        self.label(name).ok_or_else(|| Error::UnknownClass {
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet::new(Self::DEFAULT_CLASSES).expect("default alphabet is valid")
    }
}
