use std::path::PathBuf;

use hgmt_core::Sample;

use crate::error::{Error, Result};
use crate::manifest::{ManifestRecord, SourceKind};
use crate::surreal::{load_record, LoadOptions};
use crate::synthetic::{generate_figure, SyntheticFigureParams};

/// Where manifest records are materialized from.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSource {
    Synthetic(SyntheticFigureParams),
    SurrealFormat { root: PathBuf, options: LoadOptions },
}

impl SampleSource {
    pub fn kind(&self) -> SourceKind {
        match self {
            SampleSource::Synthetic(_) => SourceKind::Synthetic,
            SampleSource::SurrealFormat { .. } => SourceKind::SurrealFormat,
        }
    }

    pub fn load(&self, record: &ManifestRecord) -> Result<Sample> {
        match self {
            SampleSource::Synthetic(params) => {
                let index = record.synthetic_index().ok_or_else(|| Error::Corrupt {
                    record: record.frame_path.clone(),
                    modality: "synthetic index",
                    reason: "expected synthetic:<index>".into(),
                })?;
                Ok(generate_figure(params, index)?.sample)
            }
            SampleSource::SurrealFormat { root, options } => load_record(root, record, options),
        }
    }

    pub fn load_all<'a>(&self, records: impl IntoIterator<Item = &'a ManifestRecord>) -> Result<Vec<Sample>> {
        records.into_iter().map(|r| self.load(r)).collect()
    }
}
