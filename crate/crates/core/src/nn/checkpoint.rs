//! Little-endian f32 tensor blocks used by model checkpoints.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Writes a tensor count, then each tensor as `u32 len` + `len` f32 values.
pub fn write_tensors<W: Write>(w: &mut W, tensors: &[&[f64]]) -> Result<()> {
    w.write_u32::<LittleEndian>(tensors.len() as u32)?;
    for t in tensors {
        w.write_u32::<LittleEndian>(t.len() as u32)?;
        for &v in *t {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    Ok(())
}

/// Reads tensors written by [`write_tensors`] into existing parameter
/// buffers, checking counts and lengths.
pub fn read_tensors<R: Read>(r: &mut R, tensors: Vec<&mut [f64]>) -> Result<()> {
    let count = r.read_u32::<LittleEndian>()? as usize;
    if count != tensors.len() {
        return Err(Error::dims("checkpoint tensor count", tensors.len(), count));
    }
    for (i, t) in tensors.into_iter().enumerate() {
        let len = r.read_u32::<LittleEndian>()? as usize;
        if len != t.len() {
            return Err(Error::dims("checkpoint tensor length", (i, t.len()), (i, len)));
        }
        for v in t.iter_mut() {
            *v = r.read_f32::<LittleEndian>()? as f64;
        }
    }
    Ok(())
}
