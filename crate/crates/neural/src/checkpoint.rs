//! Binary model checkpoints.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754
//! `f64`. Layout:
//!
//! ```text
//! magic        8 bytes   "RISMLP\0\0"
//! version      u32       1
//! tag_len      u32       length of the UTF-8 tag that follows
//! tag          bytes     free-form label (e.g. the feature set name)
//! input_width  u32
//! layer_count  u32
//! widths       u32 x layer_count   output width of each layer, head last
//! per layer:
//!   weights    f64 x (out * in)    row-major, row = output unit
//!   bias       f64 x out
//! feature_mean f64 x input_width
//! feature_std  f64 x input_width
//! label_mean   f64
//! label_std    f64
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::mlp::{Dense, Mlp};
use crate::normalize::Normalizer;
use crate::train::Estimator;
use crate::{NnError, Result};

pub const MAGIC: &[u8; 8] = b"RISMLP\0\0";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(out: &mut W, estimator: &Estimator, tag: &str) -> Result<()> {
    let model = &estimator.model;
    out.write_all(MAGIC)?;
    put_u32(out, VERSION)?;
    put_u32(out, tag.len() as u32)?;
    out.write_all(tag.as_bytes())?;
    put_u32(out, model.input_width() as u32)?;
    put_u32(out, model.layers().len() as u32)?;
    for l in model.layers() {
        put_u32(out, l.output_width() as u32)?;
    }
    for l in model.layers() {
        for &w in l.weights.iter() {
            put_f64(out, w)?;
        }
        for &b in l.bias.iter() {
            put_f64(out, b)?;
        }
    }
    let norm = &estimator.normalizer;
    if !norm.is_fitted_for(model.input_width()) {
        return Err(NnError::UnfittedNormalizer(model.input_width()));
    }
    for &m in &norm.feature_mean {
        put_f64(out, m)?;
    }
    for &s in &norm.feature_std {
        put_f64(out, s)?;
    }
    put_f64(out, norm.label_mean)?;
    put_f64(out, norm.label_std)?;
    Ok(())
}

/// Returns the estimator and its tag.
pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<(Estimator, String)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = get_u32(input)?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let tag_len = get_u32(input)? as usize;
    if tag_len > 1 << 16 {
        return Err(NnError::Checkpoint("tag too long".into()));
    }
    let mut tag = vec![0u8; tag_len];
    input.read_exact(&mut tag)?;
    let tag = String::from_utf8(tag).map_err(|e| NnError::Checkpoint(e.to_string()))?;

    let input_width = get_u32(input)? as usize;
    let layer_count = get_u32(input)? as usize;
    if layer_count == 0 || layer_count > 64 {
        return Err(NnError::Checkpoint(format!("layer count {layer_count}")));
    }
    let mut widths = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        widths.push(get_u32(input)? as usize);
    }
    let mut layers = Vec::with_capacity(layer_count);
    let mut fan_in = input_width;
    for &out in &widths {
        let mut w = Vec::with_capacity(out * fan_in);
        for _ in 0..out * fan_in {
            w.push(get_f64(input)?);
        }
        let mut b = Vec::with_capacity(out);
        for _ in 0..out {
            b.push(get_f64(input)?);
        }
        let weights = Array2::from_shape_vec((out, fan_in), w)
            .map_err(|e| NnError::Checkpoint(e.to_string()))?;
        layers.push(Dense {
            weights,
            bias: Array1::from(b),
        });
        fan_in = out;
    }
    let model = Mlp::from_layers(layers)?;

    let mut read_vec = |n: usize| -> Result<Vec<f64>> { (0..n).map(|_| get_f64(input)).collect() };
    let feature_mean = read_vec(input_width)?;
    let feature_std = read_vec(input_width)?;
    let label_mean = get_f64(input)?;
    let label_std = get_f64(input)?;
    Ok((
        Estimator {
            model,
            normalizer: Normalizer {
                feature_mean,
                feature_std,
                label_mean,
                label_std,
            },
        },
        tag,
    ))
}

fn put_u32<W: Write>(out: &mut W, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(out: &mut W, v: f64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
