//! ICTS dataset files.
//!
//! Layout, integers and reals little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `ICTS` |
//! | 2 | version (1) |
//! | 4 × 5 | u32 sample count, `T`, `N`, class count, has-masks flag (0 or 1) |
//!
//! then per sample a u16 label, `T·N` f32 values in row-major order and, when
//! masks are present, `⌈T·N / 8⌉` bytes of mask bits (cell `k` is bit `k % 8`
//! of byte `k / 8`).

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use sha2::{Digest, Sha256};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ICTS";
pub const VERSION: u16 = 1;
const HEADER: usize = 26;

pub fn encode(data: &Dataset) -> Result<Vec<u8>> {
    let masks = data.has_masks();
    if !masks && data.samples.iter().any(|s| s.mask.is_some()) {
        return Err(Error::validation("either every sample or none must carry a mask"));
    }
    if data.classes > u16::MAX as usize + 1 {
        return Err(Error::validation("too many classes for the ICTS format"));
    }
    let cells = data.steps * data.features;
    let per = 2 + 4 * cells + if masks { cells.div_ceil(8) } else { 0 };
    let mut out = Vec::with_capacity(HEADER + per * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [data.len(), data.steps, data.features, data.classes, masks as usize] {
        let v = u32::try_from(v).map_err(|_| Error::validation("dataset too large for the ICTS format"))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in &data.samples {
        out.extend_from_slice(&(s.label as u16).to_le_bytes());
        for &v in s.x.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(m) = s.mask.as_ref().filter(|_| masks) {
            let mut bits = vec![0u8; cells.div_ceil(8)];
            for (k, &v) in m.data().iter().enumerate() {
                if v != 0.0 {
                    bits[k / 8] |= 1 << (k % 8);
                }
            }
            out.extend_from_slice(&bits);
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < HEADER {
        return Err(Error::format(bytes.len() as u64, "truncated ICTS header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected ICTS"));
    }
    let version = LittleEndian::read_u16(&bytes[4..6]);
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported ICTS version {version}")));
    }
    let field = |k: usize| LittleEndian::read_u32(&bytes[6 + 4 * k..10 + 4 * k]) as usize;
    let (n, steps, features, classes, flag) = (field(0), field(1), field(2), field(3), field(4));
    if flag > 1 {
        return Err(Error::format(22, format!("has-masks flag must be 0 or 1, found {flag}")));
    }
    if steps == 0 || features == 0 {
        return Err(Error::format(10, "zero dimension in ICTS header"));
    }
    if classes < 2 {
        return Err(Error::format(18, format!("class count {classes} is below two")));
    }
    let cells = steps * features;
    let mask_bytes = if flag == 1 { cells.div_ceil(8) } else { 0 };
    let per = 2 + 4 * cells + mask_bytes;
    let expected = HEADER + per * n;
    if bytes.len() < expected {
        let whole = (bytes.len() - HEADER) / per;
        return Err(Error::format(
            (HEADER + whole * per) as u64,
            format!("truncated ICTS file: sample {whole} of {n} is incomplete"),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected as u64, "trailing bytes after the last sample"));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let base = HEADER + i * per;
        let label = LittleEndian::read_u16(&bytes[base..base + 2]) as usize;
        if label >= classes {
            return Err(Error::format(base as u64, format!("label {label} out of range for {classes} classes")));
        }
        let mut x = Vec::with_capacity(cells);
        for k in 0..cells {
            let o = base + 2 + 4 * k;
            let v = LittleEndian::read_f32(&bytes[o..o + 4]);
            if !v.is_finite() {
                return Err(Error::format(o as u64, "non-finite value"));
            }
            x.push(v as f64);
        }
        let mask = if flag == 1 {
            let m = &bytes[base + 2 + 4 * cells..base + per];
            let v = (0..cells).map(|k| ((m[k / 8] >> (k % 8)) & 1) as f64).collect();
            Some(Tensor::matrix(steps, features, v)?)
        } else {
            None
        };
        samples.push(Sample {
            x: Tensor::matrix(steps, features, x)?,
            label,
            mask,
        });
    }
    Dataset::new(samples, steps, features, classes)
}

pub fn save(data: &Dataset, path: &Path) -> Result<String> {
    let bytes = encode(data)?;
    fs::write(path, &bytes).map_err(|e| Error::file(path, e))?;
    Ok(content_hash(&bytes))
}

pub fn load(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

/// Lower-case hex SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
