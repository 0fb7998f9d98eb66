//! Single-file archives of named tensors plus a JSON metadata record.
//!
//! Layout: the magic bytes `HGMTCKPT`, a little-endian `u32` format version,
//! a little-endian `u64` header length, the JSON header, then the raw tensor
//! data in header order. Writing the same content twice gives the same bytes.

use std::io::Write;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use hgmt_core::TaskSet;

use crate::config::HourglassConfig;
use crate::error::{Error, Result};
use crate::model::MultiTaskModel;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"HGMTCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Archive<S> {
    pub meta: Value,
    pub tensors: Vec<(String, ArrayD<S>)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dtype: String,
    meta: Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl<S: Scalar> Archive<S> {
    pub fn new(meta: Value) -> Self {
        Self { meta, tensors: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: ArrayD<S>) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<S>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            dtype: S::DTYPE.to_string(),
            meta: self.meta.clone(),
            tensors: self.tensors.iter().map(|(n, t)| TensorEntry { name: n.clone(), shape: t.shape().to_vec() }).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;
        let payload: usize = self.tensors.iter().map(|(_, t)| t.len() * S::BYTES).sum();
        let mut out = Vec::with_capacity(20 + json.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.tensors {
            for v in t.iter() {
                v.write_le(&mut out);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint archive"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("format version {version}, expected {FORMAT_VERSION}")));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() < len {
            return Err(corrupt("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..len]).map_err(|e| corrupt(format!("bad header: {e}")))?;
        if header.dtype != S::DTYPE {
            return Err(corrupt(format!("archive holds {} tensors, expected {}", header.dtype, S::DTYPE)));
        }
        let mut data = &body[len..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            let n: usize = entry.shape.iter().product();
            let need = n * S::BYTES;
            if data.len() < need {
                return Err(corrupt(format!("truncated data for {}", entry.name)));
            }
            let values = data[..need].chunks_exact(S::BYTES).map(S::read_le).collect();
            data = &data[need..];
            let t = ArrayD::from_shape_vec(IxDyn(&entry.shape), values).map_err(|e| corrupt(e.to_string()))?;
            tensors.push((entry.name, t));
        }
        if !data.is_empty() {
            return Err(corrupt("trailing bytes after tensor data"));
        }
        Ok(Self { meta: header.meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl<S: Scalar> MultiTaskModel<S> {
    /// Metadata record: architecture config, task set and init seed.
    pub fn archive_meta(&self) -> Value {
        serde_json::json!({
            "config": self.config(),
            "tasks": self.tasks().to_string(),
            "seed": self.params().seed(),
        })
    }

    /// Archive with the metadata record and every parameter under its own name.
    pub fn to_archive(&self) -> Archive<S> {
        let mut a = Archive::new(self.archive_meta());
        for (_, name, value) in self.params().iter() {
            a.push(name, value.clone());
        }
        a
    }

    /// Rebuilds a model from an archive written by [`MultiTaskModel::to_archive`].
    ///
    /// Tensors whose names are not parameters are ignored, so archives may
    /// carry extra state. With `expected` set, a different task set is an error.
    pub fn from_archive(archive: &Archive<S>, expected: Option<TaskSet>) -> Result<Self> {
        let meta = &archive.meta;
        let config: HourglassConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| corrupt(format!("bad config record: {e}")))?;
        let tasks_str = meta["tasks"].as_str().ok_or_else(|| corrupt("missing task set"))?;
        let tasks: TaskSet = tasks_str.parse().map_err(Error::Core)?;
        if let Some(exp) = expected {
            if exp != tasks {
                return Err(Error::TaskMismatch { expected: exp.to_string(), found: tasks.to_string() });
            }
        }
        let seed = meta["seed"].as_u64().ok_or_else(|| corrupt("missing seed"))?;
        let mut model = Self::new(tasks, config, seed)?;
        let names: Vec<String> = model.params().iter().map(|(_, n, _)| n.to_string()).collect();
        for name in names {
            let value = archive.get(&name).ok_or_else(|| corrupt(format!("missing parameter {name}")))?;
            model.params_mut().assign(&name, value.clone())?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: &Path, expected: Option<TaskSet>) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?, expected)
    }
}
