use std::path::{Path, PathBuf};

use hgmt_core::Sample;
use hgmt_data::{make_splits, DatasetManifest, LoadOptions, SampleSource, Split};

use crate::config::{DatasetConfig, DatasetKind};
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Train and test frames with the manifest they were drawn from.
#[derive(Debug, Clone)]
pub struct Splits {
    pub manifest: DatasetManifest,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// The manifest of a dataset with every record assigned to a split and cut
/// down to the configured frame counts. Frame counts are exact for synthetic
/// data and upper bounds for data on disk.
pub fn manifest(cfg: &DatasetConfig) -> Result<DatasetManifest> {
    let full = match cfg.kind {
        DatasetKind::Synthetic => synthetic_manifest(cfg)?,
        DatasetKind::SurrealFormat => {
            let path = root(cfg)?.join(MANIFEST_FILE);
            let m = DatasetManifest::load(&path)?;
            if m.records.iter().any(|r| r.split == Split::Unassigned) {
                make_splits(&m, cfg.split_seed, cfg.test_fraction)?
            } else {
                m
            }
        }
    };
    let take = |split: Split, n: usize| {
        let it = full.records.iter().filter(move |r| r.split == split).cloned();
        if n == 0 {
            it.collect::<Vec<_>>()
        } else {
            it.take(n).collect()
        }
    };
    let mut records = take(Split::Train, cfg.train_samples);
    let test = take(Split::Test, cfg.test_samples);
    let exact = cfg.kind == DatasetKind::Synthetic;
    for (split, got, want) in [("train", records.len(), cfg.train_samples), ("test", test.len(), cfg.test_samples)] {
        if got == 0 || (exact && got < want) {
            return Err(CliError::Config(format!("dataset has {got} {split} frames, {want} requested")));
        }
    }
    records.extend(test);
    Ok(DatasetManifest { records, ..full })
}

fn root(cfg: &DatasetConfig) -> Result<&Path> {
    cfg.root.as_deref().ok_or_else(|| CliError::Config("dataset.root is required for surreal-format data".into()))
}

/// Subject-disjoint synthetic manifest long enough to fill both quotas.
fn synthetic_manifest(cfg: &DatasetConfig) -> Result<DatasetManifest> {
    let subjects = cfg.synthetic.num_subjects.max(1);
    let per_subject = make_splits(&DatasetManifest::synthetic(subjects as usize, subjects), cfg.split_seed, cfg.test_fraction)?;
    let (train_subjects, test_subjects) = per_subject.counts();
    if train_subjects == 0 || test_subjects == 0 {
        return Err(CliError::Config(format!(
            "test_fraction {} of {subjects} synthetic subjects leaves an empty split",
            cfg.test_fraction
        )));
    }
    let rounds = cfg.train_samples.div_ceil(train_subjects).max(cfg.test_samples.div_ceil(test_subjects));
    let m = DatasetManifest::synthetic(rounds * subjects as usize, subjects);
    Ok(make_splits(&m, cfg.split_seed, cfg.test_fraction)?)
}

pub fn source(cfg: &DatasetConfig, manifest: &DatasetManifest, input_size: usize) -> Result<SampleSource> {
    Ok(match cfg.kind {
        DatasetKind::Synthetic => SampleSource::Synthetic(cfg.synthetic.clone()),
        DatasetKind::SurrealFormat => SampleSource::SurrealFormat {
            root: PathBuf::from(root(cfg)?),
            options: LoadOptions { output_size: input_size, crop_margin: manifest.crop_margin },
        },
    })
}

/// Loads both splits at the model's input size.
pub fn load(cfg: &DatasetConfig, input_size: usize) -> Result<Splits> {
    let manifest = manifest(cfg)?;
    let src = source(cfg, &manifest, input_size)?;
    let train = src.load_all(manifest.split(Split::Train))?;
    let test = src.load_all(manifest.split(Split::Test))?;
    Ok(Splits { manifest, train, test })
}
