//! Self-contained binary checkpoints.
//!
//! A checkpoint stores the variant string, a structure hash, the epoch
//! counter, and every named parameter and buffer as little-endian f64
//! blobs. Loading rebuilds the model from the variant string alone and
//! then restores state, so a checkpoint needs no side files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "SCSLCKPT"
//! version  u32
//! epoch    u32
//! hash     u64      structure hash of the architecture
//! variant  u32 len + UTF-8 bytes
//! count    u32      number of blobs
//! blob*    u32 name len + name, u32 ndim, u64 dims..., f64 values...
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use scslab_zoo::{build_model, LayerVariantConfig, Model};

use crate::error::{Result, TrainError};

pub const CKPT_MAGIC: [u8; 8] = *b"SCSLCKPT";
pub const CKPT_VERSION: u32 = 1;

fn ck(path: &Path, detail: impl Into<String>) -> TrainError {
    TrainError::checkpoint(path, detail)
}

/// Serializes the model's parameters and buffers plus enough metadata
/// to rebuild it.
pub fn save_checkpoint(model: &Model, epoch: u32, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| TrainError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let variant = model.config().variant_string();
    let mut blobs = model.named_params();
    blobs.extend(model.named_buffers());

    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(&CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    buf.extend_from_slice(&epoch.to_le_bytes());
    buf.extend_from_slice(&model.descriptor().structure_hash().to_le_bytes());
    buf.extend_from_slice(&(variant.len() as u32).to_le_bytes());
    buf.extend_from_slice(variant.as_bytes());
    buf.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for (name, tensor) in &blobs {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        let shape = tensor.shape();
        buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in tensor.data().iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| TrainError::io(path, e))?;
    out.flush().map_err(|e| TrainError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(ck(
                self.path,
                format!("truncated while reading {what} at offset {}", self.pos),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| ck(self.path, format!("{what} is not valid UTF-8")))
    }
}

/// Rebuilds the model named by the checkpoint and restores its state.
/// Returns the model and the stored epoch counter.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, u32)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| TrainError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| TrainError::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };

    if r.take(8, "magic")? != CKPT_MAGIC {
        return Err(ck(path, "bad magic: not a checkpoint file"));
    }
    let version = r.u32("version")?;
    if version != CKPT_VERSION {
        return Err(ck(
            path,
            format!("unsupported version {version}, expected {CKPT_VERSION}"),
        ));
    }
    let epoch = r.u32("epoch")?;
    let stored_hash = r.u64("structure hash")?;
    let variant = r.string("variant string")?;

    let config = LayerVariantConfig::from_variant_string(&variant)
        .map_err(|e| ck(path, format!("bad variant string: {e}")))?;
    let model = build_model(&config)?;
    let built_hash = model.descriptor().structure_hash();
    if built_hash != stored_hash {
        return Err(ck(
            path,
            format!(
                "structure hash mismatch: stored {stored_hash:#018x}, \
                 rebuilt {built_hash:#018x}"
            ),
        ));
    }

    let mut targets: std::collections::BTreeMap<String, scslab_tensor::Tensor> = model
        .named_params()
        .into_iter()
        .chain(model.named_buffers())
        .collect();

    let count = r.u32("blob count")? as usize;
    for _ in 0..count {
        let name = r.string("blob name")?;
        let ndim = r.u32("blob rank")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64("blob dim")? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * 8, &format!("values of '{name}'"))?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = targets
            .remove(&name)
            .ok_or_else(|| ck(path, format!("blob '{name}' has no matching tensor")))?;
        if tensor.shape() != shape.as_slice() {
            return Err(ck(
                path,
                format!(
                    "blob '{name}' has shape {shape:?}, model expects {:?}",
                    tensor.shape()
                ),
            ));
        }
        tensor
            .set_data(&values)
            .map_err(|e| ck(path, format!("blob '{name}': {e}")))?;
    }
    if !targets.is_empty() {
        let missing: Vec<&String> = targets.keys().collect();
        return Err(ck(path, format!("missing blobs for {missing:?}")));
    }
    if r.pos != bytes.len() {
        return Err(ck(
            path,
            format!("{} trailing bytes after last blob", bytes.len() - r.pos),
        ));
    }
    Ok((model, epoch))
}
