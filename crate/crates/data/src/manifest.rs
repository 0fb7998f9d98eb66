//! Dataset manifests and subject-disjoint splits.
//!
//! Text form: `#`-prefixed header lines (`# source: ...`, `# crop_margin: ...`)
//! followed by one `subject_id, clip_id, frame_path, split` record per line.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    SurrealFormat,
    Synthetic,
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::SurrealFormat => "surreal-format",
            SourceKind::Synthetic => "synthetic",
        })
    }
}

impl FromStr for SourceKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "surreal-format" => Ok(SourceKind::SurrealFormat),
            "synthetic" => Ok(SourceKind::Synthetic),
            other => Err(format!("unknown source kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "unassigned" | "-" | "" => Ok(Split::Unassigned),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub subject_id: u32,
    pub clip_id: String,
    /// Frame stem relative to the dataset root, or `synthetic:<index>`.
    pub frame_path: String,
    pub split: Split,
}

const SYNTHETIC_PREFIX: &str = "synthetic:";

impl ManifestRecord {
    /// Generator frame index of a synthetic record.
    pub fn synthetic_index(&self) -> Option<u64> {
        self.frame_path.strip_prefix(SYNTHETIC_PREFIX)?.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: SourceKind,
    /// Margin of the square crop around each bounding box, per side.
    pub crop_margin: f64,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub const DEFAULT_CROP_MARGIN: f64 = 0.1;

    pub fn new(source: SourceKind, records: Vec<ManifestRecord>) -> Self {
        Self { source, crop_margin: Self::DEFAULT_CROP_MARGIN, records }
    }

    /// Records for generator frames `0..n`, with subjects cycling as in the
    /// generator.
    pub fn synthetic(n: usize, num_subjects: u32) -> Self {
        let records = (0..n as u64)
            .map(|i| {
                let subject_id = (i % num_subjects.max(1) as u64) as u32;
                ManifestRecord {
                    subject_id,
                    clip_id: format!("subject{subject_id:03}"),
                    frame_path: format!("{SYNTHETIC_PREFIX}{i}"),
                    split: Split::Unassigned,
                }
            })
            .collect();
        Self::new(SourceKind::Synthetic, records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subjects(&self) -> BTreeSet<u32> {
        self.records.iter().map(|r| r.subject_id).collect()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// `(train, test)` record counts.
    pub fn counts(&self) -> (usize, usize) {
        (self.split(Split::Train).count(), self.split(Split::Test).count())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# source: {}", self.source).unwrap();
        writeln!(s, "# crop_margin: {}", self.crop_margin).unwrap();
        writeln!(s, "# subject_id, clip_id, frame_path, split").unwrap();
        for r in &self.records {
            writeln!(s, "{}, {}, {}, {}", r.subject_id, r.clip_id, r.frame_path, r.split).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut source = SourceKind::SurrealFormat;
        let mut crop_margin = Self::DEFAULT_CROP_MARGIN;
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let bad = |reason: String| Error::Manifest { line: i + 1, reason };
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once(':') {
                    match key.trim() {
                        "source" => source = value.trim().parse().map_err(bad)?,
                        "crop_margin" => {
                            crop_margin = value.trim().parse().map_err(|e| bad(format!("crop_margin: {e}")))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            }
            let subject_id = fields[0].parse().map_err(|e| bad(format!("subject_id {:?}: {e}", fields[0])))?;
            if fields[1].is_empty() || fields[2].is_empty() {
                return Err(bad("empty clip_id or frame_path".into()));
            }
            records.push(ManifestRecord {
                subject_id,
                clip_id: fields[1].to_string(),
                frame_path: fields[2].to_string(),
                split: fields[3].parse().map_err(bad)?,
            });
        }
        Ok(Self { source, crop_margin, records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(io_err(path))
    }
}

/// Assigns whole subjects to train or test.
///
/// `round(subjects · test_fraction)` subjects, chosen by a seeded shuffle of
/// the sorted subject ids, go to test; the rest go to train.
pub fn make_splits(manifest: &DatasetManifest, seed: u64, test_fraction: f64) -> Result<DatasetManifest> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::InvalidParams(format!("test_fraction {test_fraction} must lie in [0, 1]")));
    }
    let mut subjects: Vec<u32> = manifest.subjects().into_iter().collect();
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (subjects.len() as f64 * test_fraction).round() as usize;
    let test: BTreeSet<u32> = subjects[..n_test].iter().copied().collect();
    let mut out = manifest.clone();
    for r in &mut out.records {
        r.split = if test.contains(&r.subject_id) { Split::Test } else { Split::Train };
    }
    Ok(out)
}
