//! On-disk checkpoints.
//!
//! A checkpoint is a directory holding
//!
//! * `manifest.json`: format version, architecture name, hyperparameters,
//!   window settings and the ordered list of tensor names and shapes;
//! * `tensors.bin`: every tensor in manifest order, row-major, as
//!   little-endian 32-bit floats;
//! * `vocab.txt`: one token per line in index order.
//!
//! Values are stored at 32-bit precision. A model whose parameters have been
//! rounded with [`ParamStore::round_to_f32`] round-trips exactly; the
//! trainers return models in that state.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Arch, BinaryConfig, BinaryModel, EmbeddingInit, Model, ModelError, MultitaskConfig, MultitaskModel};
use crate::corpus::WindowMode;
use crate::embedding::Vocab;
use crate::tensor::ParamStore;

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const TENSORS: &str = "tensors.bin";
const VOCAB: &str = "vocab.txt";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("checkpoint format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("checkpoint holds a `{found}` model, expected {expected}")]
    Architecture { found: Arch, expected: String },
    #[error("tensor `{name}`: manifest shape {found:?}, model expects {expected:?}")]
    Shape { name: String, found: Vec<usize>, expected: Vec<usize> },
    #[error("manifest lists tensor `{found}` where the model expects `{expected}`")]
    TensorName { found: String, expected: String },
    #[error("manifest lists {found} tensors, model has {expected}")]
    TensorCount { found: usize, expected: usize },
    #[error("tensor data ends inside tensor `{name}`")]
    Truncated { name: String },
    #[error("tensor data has {0} bytes past the last tensor")]
    TrailingBytes(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How windows were cut for the model; prediction must reuse it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub mode: WindowMode,
    pub radius: usize,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    architecture: Arch,
    hyperparameters: serde_json::Value,
    window: WindowSpec,
    tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub window: WindowSpec,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io { path: path.to_path_buf(), source }
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<(), CheckpointError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let hyperparameters = match &self.model {
            Model::Binary(m) => serde_json::to_value(&m.config),
            Model::Multitask(m) => serde_json::to_value(&m.config),
        }
        .expect("configs serialize");
        let store = self.model.store();
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            architecture: self.model.arch(),
            hyperparameters,
            window: self.window,
            tensors: store
                .iter()
                .map(|(_, name, t)| TensorEntry { name: name.to_string(), shape: t.shape().to_vec() })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        let path = dir.join(MANIFEST);
        std::fs::write(&path, json).map_err(io_err(&path))?;

        let mut blob = Vec::with_capacity(store.num_values() * 4);
        for (_, _, t) in store.iter() {
            for &v in t.as_slice() {
                blob.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let path = dir.join(TENSORS);
        std::fs::write(&path, blob).map_err(io_err(&path))?;
        let path = dir.join(VOCAB);
        std::fs::write(&path, self.model.vocab().to_file_string()).map_err(io_err(&path))
    }

    /// Loads a checkpoint of any architecture.
    pub fn load(dir: &Path) -> Result<Self, CheckpointError> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let bad = |message: String| CheckpointError::Manifest { path: path.clone(), message };
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let found = raw.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| bad("missing format_version".into()))?;
        if found != FORMAT_VERSION as u64 {
            return Err(CheckpointError::Version { found: found as u32 });
        }
        let manifest: Manifest = serde_json::from_value(raw).map_err(|e| bad(e.to_string()))?;

        let path = dir.join(VOCAB);
        let vocab = Vocab::from_file_string(&std::fs::read_to_string(&path).map_err(io_err(&path))?);
        let hp = manifest.hyperparameters.clone();
        let bad = |e: serde_json::Error| CheckpointError::Manifest { path: dir.join(MANIFEST), message: e.to_string() };
        let mut model = match manifest.architecture {
            Arch::Binary => {
                let cfg: BinaryConfig = serde_json::from_value(hp).map_err(bad)?;
                Model::Binary(BinaryModel::new(cfg, EmbeddingInit::Random(vocab), 0)?)
            }
            arch => {
                let cfg: MultitaskConfig = serde_json::from_value(hp).map_err(bad)?;
                if Some(cfg.context) != arch.context_encoder() {
                    return Err(CheckpointError::Manifest {
                        path: dir.join(MANIFEST),
                        message: format!("context encoder {:?} does not match architecture {arch}", cfg.context),
                    });
                }
                Model::Multitask(MultitaskModel::new(cfg, EmbeddingInit::Random(vocab), 0)?)
            }
        };

        let path = dir.join(TENSORS);
        let blob = std::fs::read(&path).map_err(io_err(&path))?;
        fill_store(model.store_mut(), &manifest.tensors, &blob)?;
        Ok(Checkpoint { model, window: manifest.window })
    }

    /// Loads a checkpoint that must hold a binary model.
    pub fn load_binary(dir: &Path) -> Result<(BinaryModel, WindowSpec), CheckpointError> {
        let ck = Self::load(dir)?;
        match ck.model {
            Model::Binary(m) => Ok((m, ck.window)),
            other => Err(CheckpointError::Architecture { found: other.arch(), expected: "binary".into() }),
        }
    }

    /// Loads a checkpoint that must hold a multitask model.
    pub fn load_multitask(dir: &Path) -> Result<(MultitaskModel, WindowSpec), CheckpointError> {
        let ck = Self::load(dir)?;
        match ck.model {
            Model::Multitask(m) => Ok((m, ck.window)),
            other => Err(CheckpointError::Architecture {
                found: other.arch(),
                expected: "a multitask architecture (mlt_bilstm, mlt_ffctx or mlt_bilstmctx)".into(),
            }),
        }
    }
}

fn fill_store(store: &mut ParamStore, entries: &[TensorEntry], blob: &[u8]) -> Result<(), CheckpointError> {
    if entries.len() != store.len() {
        return Err(CheckpointError::TensorCount { found: entries.len(), expected: store.len() });
    }
    let mut offset = 0;
    for (id, entry) in store.ids().collect::<Vec<_>>().into_iter().zip(entries) {
        if entry.name != store.name(id) {
            return Err(CheckpointError::TensorName { found: entry.name.clone(), expected: store.name(id).into() });
        }
        let t = store.get_mut(id);
        if entry.shape != t.shape() {
            return Err(CheckpointError::Shape {
                name: entry.name.clone(),
                found: entry.shape.clone(),
                expected: t.shape().to_vec(),
            });
        }
        let bytes = blob
            .get(offset..offset + 4 * t.len())
            .ok_or_else(|| CheckpointError::Truncated { name: entry.name.clone() })?;
        for (v, b) in t.as_mut_slice().iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap()) as f64;
        }
        offset += bytes.len();
    }
    if offset != blob.len() {
        return Err(CheckpointError::TrailingBytes(blob.len() - offset));
    }
    Ok(())
}
