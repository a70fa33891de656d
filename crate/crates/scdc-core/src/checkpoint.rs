//! Parameter checkpoint container.
//!
//! Layout: the magic string `SCDC1`, a little-endian u32 manifest length,
//! the JSON manifest (model hyper-parameters plus one entry per array:
//! name, shape, byte offset into the data section), then the arrays as
//! little-endian f64. Serialization is byte-deterministic for a given model
//! state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ScdcModel};
use crate::rng::seed_rng;

const MAGIC: &[u8; 5] = b"SCDC1";

#[derive(Debug, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    model: ModelConfig,
    arrays: Vec<ArrayEntry>,
}

/// Serializes parameters and batch-norm buffers with the model config.
pub fn to_bytes(model: &ScdcModel) -> Vec<u8> {
    let mut entries = Vec::new();
    let mut data: Vec<u8> = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, values: &[f64]| {
        entries.push(ArrayEntry { name, shape, offset: data.len() });
        for v in values {
            data.extend_from_slice(&v.to_le_bytes());
        }
    };
    for (name, tensor) in model.named_parameters() {
        push(name, tensor.shape().to_vec(), &tensor.values());
    }
    for (name, shape, values) in model.named_buffers() {
        push(name, shape, &values);
    }
    let manifest = Manifest { model: model.config().clone(), arrays: entries };
    let manifest_json = serde_json::to_vec(&manifest).expect("manifest serializes");

    let mut out = Vec::with_capacity(5 + 4 + manifest_json.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_json);
    out.extend_from_slice(&data);
    out
}

pub fn save(model: &ScdcModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

/// Rebuilds a model from checkpoint bytes (config, parameters, buffers).
pub fn from_bytes(bytes: &[u8]) -> Result<ScdcModel> {
    if bytes.len() < 9 || &bytes[..5] != MAGIC {
        return Err(Error::Checkpoint("missing SCDC1 magic".into()));
    }
    let manifest_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let manifest_end = 9 + manifest_len;
    if bytes.len() < manifest_end {
        return Err(Error::Checkpoint("manifest truncated".into()));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[9..manifest_end])
        .map_err(|e| Error::Checkpoint(format!("manifest parse: {e}")))?;
    let data = &bytes[manifest_end..];

    let read_array = |entry: &ArrayEntry| -> Result<Vec<f64>> {
        let count: usize = entry.shape.iter().product();
        let end = entry.offset + count * 8;
        if end > data.len() {
            return Err(Error::Checkpoint(format!("array {} out of bounds", entry.name)));
        }
        Ok(data[entry.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };

    // The rng only shapes the initial values, which are all overwritten.
    let mut model = ScdcModel::new(manifest.model.clone(), &seed_rng(0))?;
    let params = model.named_parameters();
    for entry in &manifest.arrays {
        let values = read_array(entry)?;
        if let Some((_, tensor)) = params.iter().find(|(n, _)| n == &entry.name) {
            if tensor.shape() != entry.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "array {} has shape {:?}, expected {:?}",
                    entry.name,
                    entry.shape,
                    tensor.shape()
                )));
            }
            tensor.set_values(&values);
        } else {
            model.load_buffer(&entry.name, &values)?;
        }
    }
    Ok(model)
}

pub fn load(path: &Path) -> Result<ScdcModel> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    from_bytes(&bytes)
}
