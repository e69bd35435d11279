//! Model checkpoints.
//!
//! Layout, little-endian, mirroring the VLSE pair files:
//!
//! | bytes   | field                                                  |
//! |---------|--------------------------------------------------------|
//! | 4       | magic `VLCK`                                           |
//! | 4       | `u32` version (= 1)                                    |
//! | 1       | `u8` kind: 1 align, 2 VL-SAE, 3 SAE-S, 4 SAE-D         |
//! | 4 + len | training config echo, `u32` length then UTF-8 JSON     |
//! | 8       | `u32` d, `u32` h (h = d for the alignment model)        |
//! | ...     | kind-specific scalars and parameter blobs              |
//!
//! A blob is `u32` rows, `u32` cols, then rows·cols `f32` values. Biases are
//! stored as `1 × n` blobs. Kind-specific sections:
//!
//! * align: `f64` τ, then W and b of the vision encoder, language encoder,
//!   vision decoder, language decoder.
//! * VL-SAE: `u32` k, encoder, vision decoder W b, language decoder W b.
//! * SAE-S: one baseline section. SAE-D: vision section, language section.
//!   A baseline section is `u8` variant (0 SAE-S, 1 vision, 2 language),
//!   `u8` sparsifier (0 Top-K, 1 ReLU+L1), `f64` parameter (k or λ), then
//!   encoder W b, decoder W b.

use std::fs;
use std::path::Path;

use crate::align::AlignAe;
use crate::data::format::{write_atomic, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::numeric::{Affine, Matrix};
use crate::sae::{BaselineSae, BaselineVariant, SaeDPair, Sparsifier, VlSae};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"VLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Align(AlignAe),
    VlSae(VlSae),
    SaeS(BaselineSae),
    SaeD(SaeDPair),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Align(_) => "align",
            Model::VlSae(_) => "vl-sae",
            Model::SaeS(_) => "sae-s",
            Model::SaeD(_) => "sae-d",
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Model::Align(_) => 1,
            Model::VlSae(_) => 2,
            Model::SaeS(_) => 3,
            Model::SaeD(_) => 4,
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            Model::Align(a) => (a.dim(), a.dim()),
            Model::VlSae(m) => (m.dim(), m.hidden()),
            Model::SaeS(m) => (m.dim(), m.hidden()),
            Model::SaeD(p) => (p.vision.dim(), p.vision.hidden()),
        }
    }
}

fn kind_name(tag: u8) -> Result<&'static str> {
    Ok(match tag {
        1 => "align",
        2 => "vl-sae",
        3 => "sae-s",
        4 => "sae-d",
        t => return Err(Error::Malformed(format!("unknown model kind {t}"))),
    })
}

/// A model plus the JSON text of the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub config: String,
}

fn blob(w: &mut ByteWriter, m: &Matrix) -> Result<()> {
    w.len_u32(m.rows())?;
    w.len_u32(m.cols())?;
    w.f32_values(m.as_slice());
    Ok(())
}

fn vector(w: &mut ByteWriter, v: &[f64]) -> Result<()> {
    w.len_u32(1)?;
    w.len_u32(v.len())?;
    w.f32_values(v);
    Ok(())
}

fn affine(w: &mut ByteWriter, a: &Affine) -> Result<()> {
    blob(w, &a.weight)?;
    vector(w, &a.bias)
}

fn read_blob(r: &mut ByteReader, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
    let (got_r, got_c) = (r.u32()? as usize, r.u32()? as usize);
    let declared = got_r
        .checked_mul(got_c)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Malformed(format!("{what}: blob size overflows")))?;
    if declared > r.remaining() {
        return Err(Error::TruncatedFile {
            offset: r.position(),
            needed: declared,
            available: r.remaining(),
        });
    }
    if (got_r, got_c) != (rows, cols) {
        return Err(Error::DimMismatch(format!(
            "{what}: expected {rows}x{cols}, found {got_r}x{got_c}"
        )));
    }
    Matrix::from_vec(rows, cols, r.f32_values(rows * cols)?)
}

fn read_affine(r: &mut ByteReader, out: usize, inp: usize, what: &str) -> Result<Affine> {
    let weight = read_blob(r, out, inp, what)?;
    let bias = read_blob(r, 1, out, what)?.into_vec();
    Affine::new(weight, bias)
}

fn variant_tag(v: BaselineVariant) -> u8 {
    match v {
        BaselineVariant::SaeS => 0,
        BaselineVariant::SaeDVision => 1,
        BaselineVariant::SaeDLanguage => 2,
    }
}

fn write_baseline(w: &mut ByteWriter, m: &BaselineSae) -> Result<()> {
    w.u8(variant_tag(m.variant));
    match m.sparsifier {
        Sparsifier::TopK(k) => {
            w.u8(0);
            w.f64(k as f64);
        }
        Sparsifier::ReluL1(l) => {
            w.u8(1);
            w.f64(l);
        }
    }
    affine(w, &m.encoder)?;
    affine(w, &m.decoder)
}

fn read_baseline(r: &mut ByteReader, d: usize, h: usize, want: BaselineVariant) -> Result<BaselineSae> {
    let variant = r.u8()?;
    if variant != variant_tag(want) {
        return Err(Error::Malformed(format!(
            "baseline variant tag {variant}, expected {}",
            variant_tag(want)
        )));
    }
    let kind = r.u8()?;
    let param = r.f64()?;
    let sparsifier = match kind {
        0 if param.fract() == 0.0 && param >= 0.0 => Sparsifier::TopK(param as usize),
        1 => Sparsifier::ReluL1(param),
        _ => {
            return Err(Error::Malformed(format!(
                "bad sparsifier tag {kind} with parameter {param}"
            )))
        }
    };
    let encoder = read_affine(r, h, d, "baseline encoder")?;
    let decoder = read_affine(r, d, h, "baseline decoder")?;
    BaselineSae::from_parts(want, encoder, decoder, sparsifier)
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new();
    w.bytes(&CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.u8(ck.model.tag());
    w.str(&ck.config)?;
    let (d, h) = ck.model.dims();
    w.len_u32(d)?;
    w.len_u32(h)?;
    match &ck.model {
        Model::Align(a) => {
            w.f64(a.tau);
            for layer in [&a.enc_vision, &a.enc_language, &a.dec_vision, &a.dec_language] {
                affine(&mut w, layer)?;
            }
        }
        Model::VlSae(m) => {
            w.len_u32(m.k)?;
            blob(&mut w, &m.encoder)?;
            affine(&mut w, &m.dec_vision)?;
            affine(&mut w, &m.dec_language)?;
        }
        Model::SaeS(m) => write_baseline(&mut w, m)?,
        Model::SaeD(p) => {
            write_baseline(&mut w, &p.vision)?;
            write_baseline(&mut w, &p.language)?;
        }
    }
    Ok(w.into_inner())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = ByteReader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::BadVersion(version));
    }
    let tag = r.u8()?;
    kind_name(tag)?;
    let config = r.str()?;
    let (d, h) = (r.u32()? as usize, r.u32()? as usize);
    let model = match tag {
        1 => {
            if h != d {
                return Err(Error::DimMismatch(format!("alignment model with d = {d}, h = {h}")));
            }
            let tau = r.f64()?;
            let mut layers = Vec::with_capacity(4);
            for what in [
                "vision encoder",
                "language encoder",
                "vision decoder",
                "language decoder",
            ] {
                layers.push(read_affine(&mut r, d, d, what)?);
            }
            let [ev, el, dv, dl]: [Affine; 4] = layers.try_into().expect("four layers");
            Model::Align(AlignAe::from_maps(ev, el, dv, dl, tau)?)
        }
        2 => {
            let k = r.u32()? as usize;
            let encoder = read_blob(&mut r, h, d, "encoder")?;
            let dv = read_affine(&mut r, d, h, "vision decoder")?;
            let dl = read_affine(&mut r, d, h, "language decoder")?;
            Model::VlSae(VlSae::from_parts(encoder, dv, dl, k)?)
        }
        3 => Model::SaeS(read_baseline(&mut r, d, h, BaselineVariant::SaeS)?),
        _ => Model::SaeD(SaeDPair {
            vision: read_baseline(&mut r, d, h, BaselineVariant::SaeDVision)?,
            language: read_baseline(&mut r, d, h, BaselineVariant::SaeDLanguage)?,
        }),
    };
    r.finish()?;
    Ok(Checkpoint { model, config })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_checkpoint(ck)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

fn mismatch(expected: &'static str, found: &Model) -> Error {
    Error::KindMismatch {
        expected,
        found: found.kind(),
    }
}

pub fn load_align(path: impl AsRef<Path>) -> Result<AlignAe> {
    match load_checkpoint(path)?.model {
        Model::Align(a) => Ok(a),
        other => Err(mismatch("align", &other)),
    }
}

pub fn load_vlsae(path: impl AsRef<Path>) -> Result<VlSae> {
    match load_checkpoint(path)?.model {
        Model::VlSae(m) => Ok(m),
        other => Err(mismatch("vl-sae", &other)),
    }
}
