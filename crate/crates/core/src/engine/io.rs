//! SFKSP (k-space) and SFIMG (complex image) files. Same layout as SFMAP:
//! magic, `u32` header length, JSON header, then `n·n` complex values as
//! interleaved little-endian f32 `re, im` pairs in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::KSpace;
use crate::container::{read_f32s, read_header, write_f32s, write_header};
use crate::error::{Error, Result};
use crate::field::ComplexImage;

pub const KSPACE_MAGIC: &[u8; 8] = b"SFKSP1\0\0";
pub const IMAGE_MAGIC: &[u8; 8] = b"SFIMG1\0\0";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KSpaceHeader {
    n: usize,
    dtype: String,
    layout: String,
    reversed: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageHeader {
    n: usize,
    dtype: String,
    layout: String,
}

const DTYPE: &str = "f32";
const LAYOUT: &str = "interleaved";

fn write_complex<W: Write>(w: &mut W, data: &[Complex64]) -> Result<()> {
    write_f32s(w, data.iter().flat_map(|c| [c.re as f32, c.im as f32]))
}

fn read_complex<R: Read>(r: &mut R, n: usize) -> Result<Vec<Complex64>> {
    let raw = read_f32s(r, 2 * n * n)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::ShapeMismatch(format!("trailing data after {n}×{n} complex values")));
    }
    Ok(raw.chunks_exact(2).map(|p| Complex64::new(p[0].into(), p[1].into())).collect())
}

fn check_common(n: usize, dtype: &str, layout: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::MalformedHeader("n must be positive".into()));
    }
    if dtype != DTYPE || layout != LAYOUT {
        return Err(Error::MalformedHeader(format!("unsupported encoding {dtype}/{layout}")));
    }
    Ok(())
}

/// Values are stored as f32; anything finer is rounded.
pub fn write_kspace<W: Write>(w: &mut W, k: &KSpace) -> Result<()> {
    let header = KSpaceHeader {
        n: k.matrix_n,
        dtype: DTYPE.into(),
        layout: LAYOUT.into(),
        reversed: k.reversed.clone(),
    };
    write_header(w, KSPACE_MAGIC, &header)?;
    write_complex(w, &k.data)
}

pub fn read_kspace<R: Read>(r: &mut R) -> Result<KSpace> {
    let (h, _): (KSpaceHeader, _) = read_header(r, KSPACE_MAGIC)?;
    check_common(h.n, &h.dtype, &h.layout)?;
    if h.reversed.len() != h.n {
        return Err(Error::MalformedHeader(format!(
            "{} reversed flags for {} lines",
            h.reversed.len(),
            h.n
        )));
    }
    let data = read_complex(r, h.n)?;
    Ok(KSpace { matrix_n: h.n, data, reversed: h.reversed })
}

pub fn write_image<W: Write>(w: &mut W, img: &ComplexImage) -> Result<()> {
    let header = ImageHeader { n: img.n(), dtype: DTYPE.into(), layout: LAYOUT.into() };
    write_header(w, IMAGE_MAGIC, &header)?;
    write_complex(w, img.as_slice())
}

pub fn read_image<R: Read>(r: &mut R) -> Result<ComplexImage> {
    let (h, _): (ImageHeader, _) = read_header(r, IMAGE_MAGIC)?;
    check_common(h.n, &h.dtype, &h.layout)?;
    let data = read_complex(r, h.n)?;
    Ok(ComplexImage::from_vec(h.n, data).expect("n×n values"))
}

pub fn save_kspace(path: impl AsRef<Path>, k: &KSpace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_kspace(&mut w, k)?;
    w.flush()?;
    Ok(())
}

pub fn load_kspace(path: impl AsRef<Path>) -> Result<KSpace> {
    read_kspace(&mut BufReader::new(File::open(path)?))
}

pub fn save_image(path: impl AsRef<Path>, img: &ComplexImage) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_image(&mut w, img)?;
    w.flush()?;
    Ok(())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ComplexImage> {
    read_image(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_kspace(n: usize) -> KSpace {
        let data = (0..n * n)
            .map(|i| Complex64::new(f64::from(i as f32 * 0.25), -f64::from((i % 5) as f32 / 3.0)))
            .collect();
        KSpace { matrix_n: n, data, reversed: (0..n).map(|i| i % 2 == 1).collect() }
    }

    #[test]
    fn kspace_round_trip_is_exact_for_f32_values() {
        let k = sample_kspace(8);
        let mut buf = Vec::new();
        write_kspace(&mut buf, &k).unwrap();
        assert_eq!(&buf[..8], KSPACE_MAGIC);
        let back = read_kspace(&mut buf.as_slice()).unwrap();
        assert_eq!(back, k);
        let mut again = Vec::new();
        write_kspace(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn interleaved_payload() {
        let k = sample_kspace(4);
        let mut buf = Vec::new();
        write_kspace(&mut buf, &k).unwrap();
        let tail = &buf[buf.len() - 8..];
        let re = f32::from_le_bytes(tail[..4].try_into().unwrap());
        let im = f32::from_le_bytes(tail[4..].try_into().unwrap());
        assert_eq!((re, im), (k.data[15].re as f32, k.data[15].im as f32));
    }

    #[test]
    fn image_round_trip_and_magic_check() {
        let img = ComplexImage::from_vec(4, sample_kspace(4).data).unwrap();
        let mut buf = Vec::new();
        write_image(&mut buf, &img).unwrap();
        assert_eq!(read_image(&mut buf.as_slice()).unwrap(), img);
        assert!(matches!(read_kspace(&mut buf.as_slice()), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let mut buf = Vec::new();
        write_kspace(&mut buf, &sample_kspace(4)).unwrap();
        let cut = &buf[..buf.len() - 3];
        assert!(matches!(read_kspace(&mut &cut[..]), Err(Error::UnexpectedEof)));
        buf.push(0);
        assert!(matches!(read_kspace(&mut buf.as_slice()), Err(Error::ShapeMismatch(_))));
    }
}
