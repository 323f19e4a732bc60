use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Motor condition. The discriminant is the class index used by the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Healthy = 0,
    Misalignment = 1,
    BrokenRotor = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Healthy, ClassLabel::Misalignment, ClassLabel::BrokenRotor];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Healthy => "healthy",
            ClassLabel::Misalignment => "misalignment",
            ClassLabel::BrokenRotor => "broken_rotor",
        }
    }

    /// Human-readable name for tables.
    pub fn title(self) -> &'static str {
        match self {
            ClassLabel::Healthy => "Healthy",
            ClassLabel::Misalignment => "Misalignment",
            ClassLabel::BrokenRotor => "Broken Rotor",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown class name {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRecord {
    pub path: PathBuf,
    pub label: ClassLabel,
    /// Position among the samples of the same class, in manifest order.
    pub ordinal: usize,
}

/// Samples in acquisition order. Never reordered.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    records: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn from_entries(entries: impl IntoIterator<Item = (PathBuf, ClassLabel)>) -> Result<Self> {
        let mut m = DatasetManifest::default();
        for (path, label) in entries {
            m.push(path, label)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, path: PathBuf, label: ClassLabel) -> Result<()> {
        if path.as_os_str().is_empty() {
            return Err(Error::Input("manifest entry with empty path".into()));
        }
        let ordinal = self.records.iter().filter(|r| r.label == label).count();
        self.records.push(SampleRecord { path, label, ordinal });
        Ok(())
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Count per class, indexed by [`ClassLabel::index`].
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for r in &self.records {
            counts[r.label.index()] += 1;
        }
        counts
    }

    /// `relative/path.pgm<TAB>class_name`, one line per sample.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.path.to_string_lossy());
            s.push('\t');
            s.push_str(r.label.name());
            s.push('\n');
        }
        s
    }

    /// Parses the line format of [`DatasetManifest::to_text`]. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = DatasetManifest::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (path, class) = line
                .split_once('\t')
                .ok_or_else(|| Error::Input(format!("manifest line {}: expected <path>\\t<class>", n + 1)))?;
            let label = class
                .trim()
                .parse()
                .map_err(|e| Error::Input(format!("manifest line {}: {e}", n + 1)))?;
            m.push(PathBuf::from(path), label)?;
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let text = "# header\nhealthy/00000.pgm\thealthy\nbroken_rotor/00000.pgm\tbroken_rotor\n\nhealthy/00001.pgm\thealthy\n";
        let m = DatasetManifest::parse(text).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.class_counts(), [2, 0, 1]);
        assert_eq!(m.records()[2].ordinal, 1);
        assert_eq!(DatasetManifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(DatasetManifest::parse("a.pgm healthy\n").is_err());
        assert!(DatasetManifest::parse("a.pgm\tsick\n").is_err());
        assert!(DatasetManifest::parse("\thealthy\n").is_err());
    }

    #[test]
    fn label_names() {
        for c in ClassLabel::ALL {
            assert_eq!(c.name().parse::<ClassLabel>().unwrap(), c);
            assert_eq!(ClassLabel::from_index(c.index()), Some(c));
        }
    }
}
