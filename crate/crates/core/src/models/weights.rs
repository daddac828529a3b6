//! Weight file codec.
//!
//! Layout (little-endian): `"EAW1"`, u16 version (1), the config as
//! `u16 input_size · u8 levels · u16×levels base channels · f64 width_mult ·
//! u32 fc_hidden · u8 loss · u64 seed`, then u32 tensor count and per tensor
//! `u16 name length · name · u8 rank · u32×rank extents · u8 frozen ·
//! f32×len values`.

use std::path::Path;

use super::config::{LossKind, ModelConfig};
use super::params::{ModelKind, Param, ParameterSet};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"EAW1";
pub const WEIGHTS_VERSION: u16 = 1;

pub fn weights_to_bytes<T: Scalar>(params: &ParameterSet<T>) -> Vec<u8> {
    let cfg = params.config();
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.input_size as u16).to_le_bytes());
    out.push(cfg.base_channels.len() as u8);
    for &c in &cfg.base_channels {
        out.extend_from_slice(&(c as u16).to_le_bytes());
    }
    out.extend_from_slice(&cfg.width_mult.to_le_bytes());
    out.extend_from_slice(&(cfg.fc_hidden as u32).to_le_bytes());
    out.push(cfg.loss.code());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.extend_from_slice(&(params.params().len() as u32).to_le_bytes());
    for p in params.params() {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(p.value.shape().len() as u8);
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(p.frozen as u8);
        for v in p.value.data() {
            out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::decode(self.pos, format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn weights_from_bytes(bytes: &[u8]) -> Result<ParameterSet<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic").ok() != Some(&WEIGHTS_MAGIC[..]) {
        return Err(Error::decode(0, "bad weight-file magic"));
    }
    let version = r.u16("version")?;
    if version != WEIGHTS_VERSION {
        return Err(Error::decode(4, format!("unsupported weight-file version {version}")));
    }
    let input_size = r.u16("input_size")? as usize;
    let levels = r.u8("level count")? as usize;
    let base_channels = (0..levels)
        .map(|_| r.u16("base channel").map(usize::from))
        .collect::<Result<Vec<_>>>()?;
    let width_mult = f64::from_bits(r.u64("width_mult")?);
    let fc_hidden = r.u32("fc_hidden")? as usize;
    let loss_at = r.pos;
    let loss = LossKind::from_code(r.u8("loss")?).ok_or_else(|| Error::decode(loss_at, "unknown loss code"))?;
    let seed = r.u64("seed")?;
    let config = ModelConfig {
        input_size,
        base_channels,
        width_mult,
        fc_hidden,
        loss,
        seed,
    };
    config.validate()?;

    let count = r.u32("tensor count")? as usize;
    let mut params = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name_at = r.pos;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::decode(name_at, "tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        let shape = (0..rank)
            .map(|_| r.u32("extent").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let frozen = match r.u8("frozen flag")? {
            0 => false,
            1 => true,
            other => return Err(Error::decode(r.pos - 1, format!("frozen flag {other}"))),
        };
        let len: usize = shape.iter().product();
        let raw = r.take(len * 4, &format!("values of `{name}`"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        params.push(Param {
            value: Tensor::new(shape, data)?,
            name,
            frozen,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::decode(r.pos, "trailing bytes after tensors"));
    }
    let kind = if params.iter().any(|p| p.name.starts_with("clf.")) {
        ModelKind::Classifier
    } else {
        ModelKind::Autoencoder
    };
    ParameterSet::from_parts(config, kind, params)
}

pub fn save_weights<T: Scalar>(params: &ParameterSet<T>, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &weights_to_bytes(params))
}

pub fn load_weights(path: &Path) -> Result<ParameterSet<f32>> {
    weights_from_bytes(&fsutil::read(path)?).map_err(|e| match e {
        Error::Decode { offset, message } => Error::Decode {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Loads a weight file and rejects it unless its layer widths match
/// `expected`.
pub fn load_weights_for(path: &Path, expected: &ModelConfig) -> Result<ParameterSet<f32>> {
    let params = load_weights(path)?;
    if !params.config().encoder_compatible(expected) || params.config().hidden_units() != expected.hidden_units() {
        return Err(Error::Config(format!(
            "{} holds channels {:?} (width {}), expected {:?} (width {})",
            path.display(),
            params.config().channels(),
            params.config().width_mult,
            expected.channels(),
            expected.width_mult
        )));
    }
    Ok(params)
}
