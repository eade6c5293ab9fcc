//! Model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `ICAT` |
//! | 2     | format version (1) |
//! | 1     | cell tag: 0 LSTM, 1 input-cell averaged, 2 input-cell full |
//! | 1     | head tag: 0 last hidden, 1 max pool, 2 mean pool, 3 self-attention |
//! | 4     | partial attention window `k` (0 when attention runs every step) |
//! | 4 × 6 | `N`, `T`, `h`, `d_a`, `r`, `C` as u32 |
//! | …     | every parameter tensor as f64, in declaration order |
//!
//! Tensor shapes follow from the header, so none are stored.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::autodiff::Embedding;
use crate::cells::{Architecture, CellKind, HeadKind, Model, ModelSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ICAT";
pub const VERSION: u16 = 1;

pub fn encode(model: &Model) -> Vec<u8> {
    let spec = &model.spec;
    let mut out = Vec::with_capacity(40 + model.params.count() * 8);
    out.extend_from_slice(MAGIC);
    let (cell, partial) = match spec.arch.cell {
        CellKind::Lstm => (0u8, 0u32),
        CellKind::InputCell { mode, partial } => (
            if mode == Embedding::Full { 2 } else { 1 },
            partial.map_or(0, |k| k as u32),
        ),
    };
    // Writes into a Vec cannot fail.
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    out.push(cell);
    out.push(spec.arch.head.tag());
    out.write_u32::<LittleEndian>(partial).unwrap();
    for d in [spec.features, spec.steps, spec.hidden, spec.attention_dim, spec.hops, spec.classes] {
        out.write_u32::<LittleEndian>(d as u32).unwrap();
    }
    for t in model.params.tensors() {
        for &v in t.data() {
            out.write_f64::<LittleEndian>(v).unwrap();
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Cursor::new(bytes);
    let eof = |r: &Cursor<&[u8]>| Error::format(r.position(), "unexpected end of checkpoint");
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| eof(&r))?;
    if &magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected ICAT")));
    }
    let version = r.read_u16::<LittleEndian>().map_err(|_| eof(&r))?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
    }
    let cell_tag = r.read_u8().map_err(|_| eof(&r))?;
    let head_tag = r.read_u8().map_err(|_| eof(&r))?;
    let partial = r.read_u32::<LittleEndian>().map_err(|_| eof(&r))?;
    let partial = (partial > 0).then_some(partial as usize);
    let cell = match cell_tag {
        0 if partial.is_none() => CellKind::Lstm,
        1 => CellKind::InputCell {
            mode: Embedding::Averaged,
            partial,
        },
        2 => CellKind::InputCell {
            mode: Embedding::Full,
            partial,
        },
        _ => return Err(Error::format(6, format!("unknown cell tag {cell_tag}"))),
    };
    let head = HeadKind::from_tag(head_tag).ok_or_else(|| Error::format(7, format!("unknown head tag {head_tag}")))?;
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>().map_err(|_| eof(&r))? as usize;
    }
    let [features, steps, hidden, attention_dim, hops, classes] = dims;
    let spec = ModelSpec {
        features,
        steps,
        hidden,
        attention_dim,
        hops,
        classes,
        arch: Architecture { cell, head },
    };
    spec.validate().map_err(|e| Error::format(12, e.to_string()))?;
    let mut params = spec.zero_params();
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = r.read_f64::<LittleEndian>().map_err(|_| eof(&r))?;
            if !v.is_finite() {
                return Err(Error::format(r.position() - 8, "non-finite parameter"));
            }
        }
    }
    if (r.position() as usize) != bytes.len() {
        return Err(Error::format(r.position(), "trailing bytes after parameters"));
    }
    Model::new(spec, params)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    f.write_all(&encode(model)).map_err(|e| Error::file(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode(&bytes)
}
