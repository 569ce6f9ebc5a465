//! Binary model container.
//!
//! Layout: 8-byte magic, `u32` version, `u64` header length, a JSON header
//! (dtype, free-form model config, per-section layer manifest and parameter
//! shapes), then every parameter array in manifest order as little-endian
//! scalars of the header dtype. All integers are little-endian.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::layers::{Layer, LayerSpec, Sequential};
use super::tensor::{Dtype, Real};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"KQANNCK\0";
pub const VERSION: u32 = 1;
const MAX_HEADER: u64 = 64 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionManifest {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub param_shapes: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub dtype: Dtype,
    pub config: serde_json::Value,
    pub sections: Vec<SectionManifest>,
}

pub fn write_checkpoint<T: Real, W: Write>(
    mut out: W,
    config: &serde_json::Value,
    sections: &[(&str, &Sequential<T>)],
) -> Result<()> {
    let header = CheckpointHeader {
        dtype: T::DTYPE,
        config: config.clone(),
        sections: sections
            .iter()
            .map(|(name, seq)| SectionManifest {
                name: name.to_string(),
                layers: seq.specs(),
                param_shapes: seq.params().map(|p| p.shape.clone()).collect(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::new();
    for (_, seq) in sections {
        for p in seq.params() {
            buf.clear();
            buf.reserve(p.len() * T::DTYPE.size());
            for &v in &p.value {
                v.write_le(&mut buf);
            }
            out.write_all(&buf)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint whose dtype must match `T`.
pub fn read_checkpoint<T: Real, R: Read>(mut input: R) -> Result<(CheckpointHeader, Vec<Sequential<T>>)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| Error::Checkpoint("file too short for magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a model checkpoint".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > MAX_HEADER {
        return Err(Error::Checkpoint(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    input.read_exact(&mut json).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    if header.dtype != T::DTYPE {
        return Err(Error::Checkpoint(format!("checkpoint stores {:?}, expected {:?}", header.dtype, T::DTYPE)));
    }
    let size = T::DTYPE.size();
    let mut sections = Vec::with_capacity(header.sections.len());
    for sec in &header.sections {
        let expected: Vec<Vec<usize>> = sec.layers.iter().flat_map(|l| l.param_shapes()).collect();
        if expected != sec.param_shapes {
            return Err(Error::Checkpoint(format!("section {:?}: parameter shapes disagree with layers", sec.name)));
        }
        let mut layers = Vec::with_capacity(sec.layers.len());
        for spec in &sec.layers {
            let mut values = Vec::new();
            for shape in spec.param_shapes() {
                let n: usize = shape.iter().product();
                let mut raw = vec![0u8; n * size];
                input
                    .read_exact(&mut raw)
                    .map_err(|_| Error::Checkpoint(format!("section {:?}: truncated parameter data", sec.name)))?;
                values.push(raw.chunks_exact(size).map(T::read_le).collect());
            }
            layers.push(Layer::with_values(spec.clone(), values)?);
        }
        sections.push(Sequential::new(layers));
    }
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameter data".into()));
    }
    Ok((header, sections))
}
