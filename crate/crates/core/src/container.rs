//! Shared layout of the crate's binary files: an 8-byte magic, a
//! little-endian `u32` header length, a UTF-8 JSON header, then payload.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAGIC_LEN: usize = 8;

/// Upper bound on JSON header size; anything larger is treated as corruption.
const MAX_HEADER_LEN: u32 = 16 << 20;

/// Writes magic, header length and header. Returns the raw header bytes.
pub fn write_header<W: Write, H: Serialize>(
    w: &mut W,
    magic: &[u8; MAGIC_LEN],
    header: &H,
) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)
        .map_err(|e| Error::MalformedHeader(format!("cannot serialise header: {e}")))?;
    w.write_all(magic)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(json)
}

/// Reads and parses a header written by [`write_header`]. Returns the header
/// and its raw bytes.
pub fn read_header<R: Read, H: DeserializeOwned>(
    r: &mut R,
    magic: &'static [u8; MAGIC_LEN],
) -> Result<(H, Vec<u8>)> {
    let mut got = [0u8; MAGIC_LEN];
    r.read_exact(&mut got).map_err(Error::from_read)?;
    if &got != magic {
        return Err(Error::BadMagic { expected: magic });
    }
    let len = read_u32(r)?;
    if len > MAX_HEADER_LEN {
        return Err(Error::MalformedHeader(format!("header length {len} too large")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json).map_err(Error::from_read)?;
    let header = serde_json::from_slice(&json)
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    Ok((header, json))
}

pub fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(Error::from_read)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_f32s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f32>) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(f32::to_le_bytes).collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_f32s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(Error::from_read)?;
    Ok(decode_f32s(&bytes))
}

pub fn decode_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub fn decode_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect()
}
