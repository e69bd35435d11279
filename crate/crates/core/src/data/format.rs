//! VLSE embedding-pair files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes        | field                                            |
//! |--------------|--------------------------------------------------|
//! | 4            | magic `VLSE`                                     |
//! | 4            | `u32` version (= 1)                              |
//! | 4            | `u32` N (pairs)                                  |
//! | 4            | `u32` d (dimension)                              |
//! | 1            | `u8` flags; bit 0 = latents present              |
//! | 4·N·d        | vision rows, `f32`, row-major                    |
//! | 4·N·d        | language rows, `f32`, row-major                  |
//! | 4·N·d        | latents (only when bit 0 is set)                 |
//! | N × (4 + len)| ids: `u32` byte length followed by UTF-8 bytes   |
//!
//! Values are computed in `f64` and rounded to `f32` on write.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::pairs::EmbeddingPairSet;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

pub const PAIRS_MAGIC: [u8; 4] = *b"VLSE";
pub const FORMAT_VERSION: u32 = 1;
pub const FLAG_LATENTS: u8 = 0b0000_0001;
pub const HEADER_LEN: usize = 17;

/// Fixed-size part of a VLSE file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairsHeader {
    pub version: u32,
    pub n: u32,
    pub d: u32,
    pub flags: u8,
}

impl PairsHeader {
    pub fn has_latents(&self) -> bool {
        self.flags & FLAG_LATENTS != 0
    }
}

pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32_values(&mut self, vals: &[f64]) {
        self.buf.reserve(vals.len() * 4);
        for &v in vals {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }

    pub fn len_u32(&mut self, n: usize) -> Result<()> {
        let v = u32::try_from(n).map_err(|_| Error::BadSpec(format!("{n} does not fit in u32")))?;
        self.u32(v);
        Ok(())
    }

    pub fn str(&mut self, s: &str) -> Result<()> {
        self.len_u32(s.len())?;
        self.bytes(s.as_bytes());
        Ok(())
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::TruncatedFile {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn magic(&mut self, want: [u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != want {
            return Err(Error::BadMagic([m[0], m[1], m[2], m[3]]));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }

    /// `count` f32 values widened to f64; the byte length is checked
    /// against what is left before anything is allocated.
    pub fn f32_values(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| Error::Malformed(format!("{count} floats overflow")))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|e| Error::Malformed(format!("invalid UTF-8: {e}")))
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Malformed(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn encode_pairs(set: &EmbeddingPairSet) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new();
    w.bytes(&PAIRS_MAGIC);
    w.u32(FORMAT_VERSION);
    w.len_u32(set.len())?;
    w.len_u32(set.dim())?;
    let flags = if set.latents.is_some() { FLAG_LATENTS } else { 0 };
    w.u8(flags);
    w.f32_values(set.vision.as_slice());
    w.f32_values(set.language.as_slice());
    if let Some(lat) = &set.latents {
        if lat.cols() != set.dim() {
            return Err(Error::DimMismatch(format!(
                "latents have {} columns, rows have {}",
                lat.cols(),
                set.dim()
            )));
        }
        w.f32_values(lat.as_slice());
    }
    for id in &set.ids {
        w.str(id)?;
    }
    Ok(w.into_inner())
}

pub fn read_pairs_header(bytes: &[u8]) -> Result<PairsHeader> {
    let mut r = ByteReader::new(bytes);
    r.magic(PAIRS_MAGIC)?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::BadVersion(version));
    }
    let n = r.u32()?;
    let d = r.u32()?;
    let flags = r.u8()?;
    if flags & !FLAG_LATENTS != 0 {
        return Err(Error::Malformed(format!("unknown flag bits {flags:#010b}")));
    }
    if d == 0 && n > 0 {
        return Err(Error::DimMismatch("dimension 0 with nonzero rows".into()));
    }
    Ok(PairsHeader { version, n, d, flags })
}

pub fn decode_pairs(bytes: &[u8]) -> Result<EmbeddingPairSet> {
    let header = read_pairs_header(bytes)?;
    let mut r = ByteReader::new(bytes);
    r.take(HEADER_LEN)?;
    let (n, d) = (header.n as usize, header.d as usize);
    let cells = n
        .checked_mul(d)
        .ok_or_else(|| Error::Malformed("N·d overflows".into()))?;
    let blocks = if header.has_latents() { 3 } else { 2 };
    // minimum: float blocks plus a 4-byte length per id
    let need = cells
        .checked_mul(4 * blocks)
        .and_then(|b| b.checked_add(4 * n))
        .ok_or_else(|| Error::Malformed("declared size overflows".into()))?;
    if need > r.remaining() {
        return Err(Error::TruncatedFile {
            offset: HEADER_LEN,
            needed: need,
            available: r.remaining(),
        });
    }
    let vision = Matrix::from_vec(n, d, r.f32_values(cells)?)?;
    let language = Matrix::from_vec(n, d, r.f32_values(cells)?)?;
    let latents = if header.has_latents() {
        Some(Matrix::from_vec(n, d, r.f32_values(cells)?)?)
    } else {
        None
    };
    let ids = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let mut set = EmbeddingPairSet::new(vision, language, ids)?;
    set.latents = latents;
    Ok(set)
}

pub fn save_pairs(set: &EmbeddingPairSet, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pairs(set)?)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<EmbeddingPairSet> {
    decode_pairs(&fs::read(path)?)
}

/// Loads and checks the dimension.
pub fn load_pairs_with_dim(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingPairSet> {
    let set = load_pairs(path)?;
    if set.dim() != dim {
        return Err(Error::DimMismatch(format!(
            "file has d = {}, expected {dim}",
            set.dim()
        )));
    }
    Ok(set)
}
