//! `FTNN` model checkpoints (little-endian):
//!
//! ```text
//! magic "FTNN", u16 version,
//! u8 variant (0 freqtime, 1 atten),
//! u32 n_p_t, n_p_f, n_t, n_f, l_group,
//! u8 share_time_blocks, u8 share_freq_blocks,
//! u32 tensor count, then per tensor: u32 length + f32 values
//! ```
//!
//! Tensors follow declaration order: frequency blocks, attention blocks
//! (embedding then factor net), time blocks; each layer as weights
//! (row-major `out x in`) then biases.

use std::fs;
use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::{EstimatorModel, FreqTimeConfig, Variant};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_tensors, write_tensors};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FTNN";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn model_to_bytes(model: &EstimatorModel) -> Result<Vec<u8>> {
    let mut w = Vec::new();
    w.extend_from_slice(CHECKPOINT_MAGIC);
    w.write_u16::<LE>(CHECKPOINT_VERSION)?;
    w.write_u8(match model.variant {
        Variant::FreqTime => 0,
        Variant::AttenFreqTime => 1,
    })?;
    let c = &model.config;
    for d in [c.n_p_t, c.n_p_f, c.n_t, c.n_f, c.l_group] {
        w.write_u32::<LE>(d as u32)?;
    }
    w.write_u8(c.share_time_blocks as u8)?;
    w.write_u8(c.share_freq_blocks as u8)?;
    write_tensors(&mut w, &model.param_slices())?;
    Ok(w)
}

pub fn model_from_bytes(mut bytes: &[u8]) -> Result<EstimatorModel> {
    let r = &mut bytes;
    let corrupt = |e: std::io::Error| Error::CorruptHeader(format!("checkpoint: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(corrupt)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::CorruptHeader(format!("bad checkpoint magic {magic:?}")));
    }
    let version = r.read_u16::<LE>().map_err(corrupt)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let variant = match r.read_u8().map_err(corrupt)? {
        0 => Variant::FreqTime,
        1 => Variant::AttenFreqTime,
        v => return Err(Error::CorruptHeader(format!("unknown variant tag {v}"))),
    };
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.read_u32::<LE>().map_err(corrupt)? as usize;
    }
    let share_time_blocks = r.read_u8().map_err(corrupt)? != 0;
    let share_freq_blocks = r.read_u8().map_err(corrupt)? != 0;
    let config = FreqTimeConfig {
        n_p_t: dims[0],
        n_p_f: dims[1],
        n_t: dims[2],
        n_f: dims[3],
        l_group: dims[4],
        share_time_blocks,
        share_freq_blocks,
    };
    config
        .validate()
        .map_err(|e| Error::CorruptHeader(format!("checkpoint config: {e}")))?;
    let mut model = EstimatorModel::new(variant, config, 0)?;
    read_tensors(r, model.param_slices_mut()).map_err(|e| match e {
        Error::Io(io) => Error::CorruptHeader(format!("checkpoint tensors: {io}")),
        other => other,
    })?;
    if !r.is_empty() {
        return Err(Error::TrailingData(model.param_slices().len() as u64));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &EstimatorModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EstimatorModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("checkpoint {}: {e}", path.display()),
        ))
    })?;
    model_from_bytes(&bytes)
}

/// Hex SHA-256 of the serialized checkpoint.
pub fn model_checksum(model: &EstimatorModel) -> Result<String> {
    let digest = Sha256::digest(model_to_bytes(model)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
