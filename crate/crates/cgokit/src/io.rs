//! The `CGO1` binary field format and plain-text `key=value` sidecars.
//!
//! Layout: magic `CGO1`, kind byte (1 scalar, 3 vector), three zero bytes,
//! three little-endian `u32` copies of `N`, a little-endian `f64` box length,
//! then `kind·N³` interleaved `(re, im)` `f64` samples, components outermost.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::field::{ComplexField, FieldError, Grid3, VectorField};

const MAGIC: &[u8; 4] = b"CGO1";
const HEADER_LEN: usize = 4 + 4 + 12 + 8;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic")]
    BadMagic,
    #[error("unknown field kind {0:#04x}")]
    BadKind(u8),
    #[error("reserved header bytes must be zero")]
    BadReserved,
    #[error("dimension mismatch: header N values {0:?} differ")]
    DimensionMismatch([u32; 3]),
    #[error("expected a {expected} field, file holds {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("truncated payload")]
    TruncatedPayload,
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error(transparent)]
    Grid(#[from] FieldError),
    #[error("malformed metadata line {0:?}")]
    BadMetadata(String),
}

/// Contents of a `CGO1` file.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldFile {
    Scalar(ComplexField),
    Vector(VectorField),
}

impl FieldFile {
    fn kind_name(&self) -> &'static str {
        match self {
            FieldFile::Scalar(_) => "scalar",
            FieldFile::Vector(_) => "vector",
        }
    }
}

fn encode(grid: &Grid3, kind: u8, comps: &[&ComplexField]) -> Vec<u8> {
    let n = grid.n() as u32;
    let mut out = Vec::with_capacity(HEADER_LEN + comps.len() * grid.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[kind, 0, 0, 0]);
    for _ in 0..3 {
        out.extend_from_slice(&n.to_le_bytes());
    }
    out.extend_from_slice(&grid.l().to_le_bytes());
    for c in comps {
        for v in c.values() {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

/// Serialize to bytes.
pub fn encode_file(file: &FieldFile) -> Vec<u8> {
    match file {
        FieldFile::Scalar(f) => encode(f.grid(), 1, &[f]),
        FieldFile::Vector(v) => {
            let [x, y, z] = v.components();
            encode(v.grid(), 3, &[x, y, z])
        }
    }
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4-byte slice"))
}

fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().expect("8-byte slice"))
}

/// Parse bytes produced by [`encode_file`].
pub fn decode_file(bytes: &[u8]) -> Result<FieldFile, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::TruncatedPayload);
    }
    let kind = bytes[4];
    if kind != 1 && kind != 3 {
        return Err(FormatError::BadKind(kind));
    }
    if bytes[5..8] != [0, 0, 0] {
        return Err(FormatError::BadReserved);
    }
    let dims = [le_u32(&bytes[8..12]), le_u32(&bytes[12..16]), le_u32(&bytes[16..20])];
    if dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(FormatError::DimensionMismatch(dims));
    }
    let grid = Grid3::new(dims[0] as usize, le_f64(&bytes[20..28]))?;
    let per = grid.len() * 16;
    let need = HEADER_LEN + kind as usize * per;
    if bytes.len() < need {
        return Err(FormatError::TruncatedPayload);
    }
    if bytes.len() > need {
        return Err(FormatError::TrailingBytes(bytes.len() - need));
    }
    let comp = |c: usize| {
        let base = HEADER_LEN + c * per;
        let values = bytes[base..base + per]
            .chunks_exact(16)
            .map(|s| Complex64::new(le_f64(&s[..8]), le_f64(&s[8..])))
            .collect();
        ComplexField::from_values(grid, values)
    };
    Ok(if kind == 1 {
        FieldFile::Scalar(comp(0)?)
    } else {
        FieldFile::Vector(VectorField::from_components([comp(0)?, comp(1)?, comp(2)?])?)
    })
}

pub fn write_file(path: &Path, file: &FieldFile) -> Result<(), FormatError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_file(file))?;
    f.flush()?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<FieldFile, FormatError> {
    decode_file(&fs::read(path)?)
}

pub fn write_field(path: &Path, f: &ComplexField) -> Result<(), FormatError> {
    write_file(path, &FieldFile::Scalar(f.clone()))
}

pub fn read_field(path: &Path) -> Result<ComplexField, FormatError> {
    match read_file(path)? {
        FieldFile::Scalar(f) => Ok(f),
        other => Err(FormatError::KindMismatch {
            expected: "scalar",
            found: other.kind_name(),
        }),
    }
}

pub fn write_vector_field(path: &Path, v: &VectorField) -> Result<(), FormatError> {
    write_file(path, &FieldFile::Vector(v.clone()))
}

pub fn read_vector_field(path: &Path) -> Result<VectorField, FormatError> {
    match read_file(path)? {
        FieldFile::Vector(v) => Ok(v),
        other => Err(FormatError::KindMismatch {
            expected: "vector",
            found: other.kind_name(),
        }),
    }
}

/// Write `key=value` lines in the given order.
pub fn write_metadata(path: &Path, entries: &[(String, String)]) -> Result<(), FormatError> {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<Vec<(String, String)>, FormatError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| FormatError::BadMetadata(l.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize) -> ComplexField {
        let g = Grid3::new(n, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let v = (0..g.len())
            .map(|_| Complex64::new(rng.random(), rng.random::<f64>() - 0.5))
            .collect();
        ComplexField::from_values(g, v).unwrap()
    }

    fn bits(f: &ComplexField) -> Vec<(u64, u64)> {
        f.values().iter().map(|v| (v.re.to_bits(), v.im.to_bits())).collect()
    }

    #[test]
    fn scalar_roundtrip_is_bitwise() {
        let f = random(8);
        let back = match decode_file(&encode_file(&FieldFile::Scalar(f.clone()))).unwrap() {
            FieldFile::Scalar(b) => b,
            _ => panic!("kind changed"),
        };
        assert!(back.is_finite());
        assert_eq!(bits(&back), bits(&f));
        assert_eq!(back.grid(), f.grid());
    }

    #[test]
    fn header_layout() {
        let bytes = encode_file(&FieldFile::Scalar(random(8)));
        assert_eq!(&bytes[..8], b"CGO1\x01\0\0\0");
        assert_eq!(le_u32(&bytes[8..12]), 8);
        assert_eq!(le_f64(&bytes[20..28]), 4.0);
        assert_eq!(bytes.len(), 28 + 512 * 16);
    }

    #[test]
    fn corrupted_inputs_are_rejected() {
        let mut bytes = encode_file(&FieldFile::Scalar(random(8)));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_file(&bad).unwrap_err().to_string(), "bad magic");

        let mut mismatched = bytes.clone();
        mismatched[12..16].copy_from_slice(&16u32.to_le_bytes());
        assert!(matches!(
            decode_file(&mismatched),
            Err(FormatError::DimensionMismatch(_))
        ));

        for off in [8, 12, 16] {
            bytes[off..off + 4].copy_from_slice(&16u32.to_le_bytes());
        }
        assert_eq!(decode_file(&bytes).unwrap_err().to_string(), "truncated payload");
    }
}
