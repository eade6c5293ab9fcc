//! MNIST as time series: each 28 × 28 image becomes 28 timesteps (rows, top
//! to bottom) of 28 features, with pixels scaled to `[0, 1]`.
//!
//! Files must be uncompressed IDX: a big-endian header `00 00 08 dims`
//! followed by one u32 per dimension, then unsigned bytes.

use std::fs;
use std::path::Path;

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SIDE: usize = 28;
pub const DEFAULT_DIGITS: [u8; 3] = [1, 6, 7];

/// A parsed IDX array of unsigned bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
    /// Byte offset of `data[0]` in the file.
    pub data_offset: u64,
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len() as u64, "truncated IDX header"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::format(0, format!("bad IDX magic {:02x?}", &bytes[..4])));
    }
    if bytes[2] != 0x08 {
        return Err(Error::format(2, format!("unsupported IDX element type {:#04x}", bytes[2])));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 {
        return Err(Error::format(3, "IDX file declares zero dimensions"));
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::format(bytes.len() as u64, "truncated IDX dimension list"));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|k| {
            let o = 4 + 4 * k;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    let expected = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let expected = expected.ok_or_else(|| Error::format(4, "IDX dimensions overflow"))?;
    let available = bytes.len() - header;
    if available < expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated IDX data: expected {expected} bytes after the header, found {available}"),
        ));
    }
    if available > expected {
        return Err(Error::format((header + expected) as u64, "trailing bytes after IDX data"));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
        data_offset: header as u64,
    })
}

/// Builds a dataset from parsed image (`n × 28 × 28`) and label (`n`) arrays,
/// keeping only `digits` and relabelling them `0..digits.len()` in the given
/// order.
pub fn from_idx(images: &IdxArray, labels: &IdxArray, digits: &[u8]) -> Result<Dataset> {
    if images.dims.len() != 3 {
        return Err(Error::format(3, format!("image file has {} dimensions, expected 3", images.dims.len())));
    }
    if images.dims[1] != SIDE || images.dims[2] != SIDE {
        return Err(Error::format(
            8,
            format!("images are {}x{}, expected 28x28", images.dims[1], images.dims[2]),
        ));
    }
    if labels.dims.len() != 1 {
        return Err(Error::format(3, format!("label file has {} dimensions, expected 1", labels.dims.len())));
    }
    if labels.dims[0] != images.dims[0] {
        return Err(Error::format(
            4,
            format!("{} labels for {} images", labels.dims[0], images.dims[0]),
        ));
    }
    if digits.len() < 2 {
        return Err(Error::validation("select at least two digits"));
    }
    let px = SIDE * SIDE;
    let mut samples = Vec::new();
    for (i, &digit) in labels.data.iter().enumerate() {
        if digit > 9 {
            return Err(Error::format(labels.data_offset + i as u64, format!("label {digit} is not a digit")));
        }
        let Some(label) = digits.iter().position(|&d| d == digit) else {
            continue;
        };
        let pixels = &images.data[i * px..(i + 1) * px];
        let x = Tensor::matrix(SIDE, SIDE, pixels.iter().map(|&p| p as f64 / 255.0).collect())?;
        samples.push(Sample { x, label, mask: None });
    }
    Dataset::new(samples, SIDE, SIDE, digits.len())
}

/// Loads an image/label file pair.
pub fn load(images: &Path, labels: &Path, digits: &[u8]) -> Result<Dataset> {
    let img = fs::read(images).map_err(|e| Error::file(images, e))?;
    let lab = fs::read(labels).map_err(|e| Error::file(labels, e))?;
    let img = parse_idx(&img).map_err(|e| in_file(e, images))?;
    let lab = parse_idx(&lab).map_err(|e| in_file(e, labels))?;
    from_idx(&img, &lab, digits)
}

fn in_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    }
}

/// Training and test pairs under the standard MNIST file names in `dir`.
pub fn load_dir(dir: &Path, digits: &[u8]) -> Result<super::Splits> {
    Ok(super::Splits {
        train: load(
            &dir.join("train-images-idx3-ubyte"),
            &dir.join("train-labels-idx1-ubyte"),
            digits,
        )?,
        test: load(
            &dir.join("t10k-images-idx3-ubyte"),
            &dir.join("t10k-labels-idx1-ubyte"),
            digits,
        )?,
    })
}

/// Serialises a byte array as IDX (used by tests and fixtures).
pub fn encode_idx(dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, dims.len() as u8];
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}
