//! SFMAP map files: magic `SFMAP1\0\0`, `u32` header length, JSON header,
//! then the five fields as contiguous row-major little-endian f32 arrays.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ParametricMaps;
use crate::container::{read_f32s, read_header, write_f32s, write_header};
use crate::error::{Error, Result};
use crate::field::ScalarField;

pub const MAP_MAGIC: &[u8; 8] = b"SFMAP1\0\0";
const FIELD_ORDER: [&str; 5] = ["t1", "t2", "m0", "db0", "b1"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapHeader {
    n: usize,
    fov_mm: f64,
    fields: Vec<String>,
    dtype: String,
}

pub fn write_maps<W: Write>(w: &mut W, maps: &ParametricMaps) -> Result<()> {
    let header = MapHeader {
        n: maps.n(),
        fov_mm: maps.fov_mm,
        fields: FIELD_ORDER.iter().map(|s| s.to_string()).collect(),
        dtype: "f32".into(),
    };
    write_header(w, MAP_MAGIC, &header)?;
    for (_, field) in maps.fields() {
        write_f32s(w, field.as_slice().iter().map(|&v| v as f32))?;
    }
    Ok(())
}

pub fn read_maps<R: Read>(r: &mut R) -> Result<ParametricMaps> {
    let (header, _): (MapHeader, _) = read_header(r, MAP_MAGIC)?;
    if header.dtype != "f32" {
        return Err(Error::MalformedHeader(format!("unsupported dtype `{}`", header.dtype)));
    }
    if header.fields != FIELD_ORDER {
        return Err(Error::MalformedHeader(format!(
            "field order must be {FIELD_ORDER:?}, got {:?}",
            header.fields
        )));
    }
    let n = header.n;
    if n == 0 {
        return Err(Error::MalformedHeader("n must be positive".into()));
    }
    let mut fields = Vec::with_capacity(5);
    for _ in FIELD_ORDER {
        let data = read_f32s(r, n * n)?;
        let data = data.into_iter().map(f64::from).collect();
        fields.push(ScalarField::from_vec(n, data).expect("n×n values"));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::ShapeMismatch(format!(
            "trailing data after five {n}×{n} fields"
        )));
    }
    let [t1, t2, m0, db0, b1]: [ScalarField; 5] = fields.try_into().expect("five fields");
    let maps = ParametricMaps { fov_mm: header.fov_mm, t1, t2, m0, db0, b1 };
    maps.validate()?;
    Ok(maps)
}

pub fn load_maps(path: impl AsRef<Path>) -> Result<ParametricMaps> {
    read_maps(&mut BufReader::new(File::open(path)?))
}

pub fn save_maps(path: impl AsRef<Path>, maps: &ParametricMaps) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_maps(&mut w, maps)?;
    w.flush()?;
    Ok(())
}
