use std::fmt;

use crate::error::{Error, Result};

/// Window event classes.
///
/// | class | reflections | faulty |
/// |-------|-------------|--------|
/// | C0 | 2 | none |
/// | C1 | 2 | first |
/// | C2 | 2 | second |
/// | C3 | 2 | both |
/// | C4 | 1 | none |
/// | C5 | 1 | the one |
/// | C6 | 0 | - |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventClass {
    C0,
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
}

impl EventClass {
    pub const ALL: [EventClass; 7] =
        [EventClass::C0, EventClass::C1, EventClass::C2, EventClass::C3, EventClass::C4, EventClass::C5, EventClass::C6];

    /// Class for an ordered list of per-reflection faulty flags.
    pub fn from_faulty_flags(flags: &[bool]) -> Result<Self> {
        Ok(match flags {
            [] => EventClass::C6,
            [false] => EventClass::C4,
            [true] => EventClass::C5,
            [false, false] => EventClass::C0,
            [true, false] => EventClass::C1,
            [false, true] => EventClass::C2,
            [true, true] => EventClass::C3,
            _ => return Err(Error::Dataset(format!("{} reflections in one window", flags.len()))),
        })
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or_else(|| Error::Dataset(format!("event class index {i} out of range")))
    }

    pub fn reflection_count(self) -> usize {
        match self {
            EventClass::C0 | EventClass::C1 | EventClass::C2 | EventClass::C3 => 2,
            EventClass::C4 | EventClass::C5 => 1,
            EventClass::C6 => 0,
        }
    }

    /// Faulty flag for each reflection, in order.
    pub fn faulty_flags(self) -> &'static [bool] {
        match self {
            EventClass::C0 => &[false, false],
            EventClass::C1 => &[true, false],
            EventClass::C2 => &[false, true],
            EventClass::C3 => &[true, true],
            EventClass::C4 => &[false],
            EventClass::C5 => &[true],
            EventClass::C6 => &[],
        }
    }

    pub fn is_faulty(self) -> bool {
        self.faulty_flags().iter().any(|&f| f)
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C_{}", self.index())
    }
}

/// One network-dependent training example.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSample {
    pub values: Vec<f64>,
    /// 0 = normal, `i` = branch `i` faulty.
    pub label: usize,
    pub pnr_db: f64,
}

/// One fixed-length window with its event labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub values: Vec<f64>,
    pub event_class: EventClass,
    /// In-window peak index divided by the window length.
    pub positions: [f64; 2],
    /// Clean normalized peak heights.
    pub levels: [f64; 2],
    /// Validity of `positions[k]` and `levels[k]`.
    pub mask: [bool; 2],
    pub pnr_db: f64,
    /// Absolute index of the first window sample.
    pub start: usize,
}

impl WindowSample {
    pub fn reflection_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// 0, 1 or 2 reflections, the target of the reflection-type head.
    pub fn type_class(&self) -> usize {
        self.event_class.reflection_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn code(self) -> u8 {
        match self {
            SplitTag::Train => 0,
            SplitTag::Val => 1,
            SplitTag::Test => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(SplitTag::Train),
            1 => Ok(SplitTag::Val),
            2 => Ok(SplitTag::Test),
            _ => Err(Error::format("dataset", format!("split code {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

/// Anything a [`Dataset`] can hold.
pub trait Record: Clone + Send + Sync {
    /// Kind byte stored in the file header.
    const KIND: u8;
    const KIND_NAME: &'static str;

    fn class(&self) -> usize;
    fn values(&self) -> &[f64];
}

impl Record for NetworkSample {
    const KIND: u8 = 1;
    const KIND_NAME: &'static str = "network";

    fn class(&self) -> usize {
        self.label
    }

    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Record for WindowSample {
    const KIND: u8 = 2;
    const KIND_NAME: &'static str = "window";

    fn class(&self) -> usize {
        self.event_class.index()
    }

    fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Labeled records with split tags and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R> {
    pub records: Vec<R>,
    /// One tag per record; empty until split.
    pub splits: Vec<SplitTag>,
    pub num_classes: usize,
    pub seed: u64,
    pub config_digest: [u8; 32],
    /// Windows skipped because they held three or more reflections.
    pub rejected: u64,
}

impl<R: Record> Dataset<R> {
    pub fn new(records: Vec<R>, num_classes: usize, seed: u64, config_digest: [u8; 32]) -> Self {
        Dataset { records, splits: Vec::new(), num_classes, seed, config_digest, rejected: 0 }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_split(&self) -> bool {
        self.splits.len() == self.records.len() && !self.records.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for r in &self.records {
            c[r.class()] += 1;
        }
        c
    }

    /// Records tagged with `tag`, in dataset order.
    pub fn split(&self, tag: SplitTag) -> Vec<&R> {
        self.records.iter().zip(&self.splits).filter(|(_, &t)| t == tag).map(|(r, _)| r).collect()
    }

    pub fn split_owned(&self, tag: SplitTag) -> Vec<R> {
        self.split(tag).into_iter().cloned().collect()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.config_digest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_table() {
        for c in EventClass::ALL {
            assert_eq!(EventClass::from_faulty_flags(c.faulty_flags()).unwrap(), c);
            assert_eq!(c.faulty_flags().len(), c.reflection_count());
            assert_eq!(EventClass::from_index(c.index()).unwrap(), c);
        }
        assert!(EventClass::from_faulty_flags(&[false; 3]).is_err());
        assert_eq!(EventClass::C1.to_string(), "C_1");
        assert!(!EventClass::C4.is_faulty());
        assert!(EventClass::C2.is_faulty());
    }
}
