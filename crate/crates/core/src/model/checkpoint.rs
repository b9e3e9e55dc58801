//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! magic "RTDE" | version u16 | m u32 | n u32 | sigma f64
//! for G then H:
//!     layer count u32
//!     per layer: rows u32 | cols u32 | activation tag u8 | activation param f64
//!     per layer: weights (rows·cols f64, row-major) | bias (rows f64)
//! feature count u32 (0 = no normalization) | per feature: min f64 | max f64
//! crc32 u32 over every preceding byte
//! ```
//!
//! Activation tags: 0 identity, 1 leaky ReLU (param = slope), 2 sigmoid.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Activation, DenseLayer, Mlp};
use crate::simdata::NormStats;

use super::RoundtripModel;

const MAGIC: &[u8; 4] = b"RTDE";
pub const FORMAT_VERSION: u16 = 1;

fn put_net(buf: &mut Vec<u8>, net: &Mlp) {
    buf.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let (tag, param) = layer.activation().tag();
        buf.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        buf.push(tag);
        buf.extend_from_slice(&param.to_le_bytes());
    }
    for layer in net.layers() {
        for v in layer.weights().as_slice().iter().chain(layer.bias()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn write_checkpoint(model: &RoundtripModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.latent_dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.data_dim() as u32).to_le_bytes());
    buf.extend_from_slice(&model.sigma().to_le_bytes());
    put_net(&mut buf, model.generator());
    put_net(&mut buf, model.encoder());
    match model.norm_stats() {
        Some(stats) => {
            buf.extend_from_slice(&(stats.dim() as u32).to_le_bytes());
            for (lo, hi) in stats.mins().iter().zip(stats.maxs()) {
                buf.extend_from_slice(&lo.to_le_bytes());
                buf.extend_from_slice(&hi.to_le_bytes());
            }
        }
        None => buf.extend_from_slice(&0u32.to_le_bytes()),
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            Error::Corrupt(format!("file ends early (needed {n} bytes at offset {})", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn net(&mut self) -> Result<Mlp> {
        let count = self.u32()? as usize;
        if count == 0 {
            return Err(Error::Corrupt("network without layers".into()));
        }
        let mut headers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let rows = self.u32()? as usize;
            let cols = self.u32()? as usize;
            let tag = self.u8()?;
            let param = self.f64()?;
            let act = Activation::from_tag(tag, param)
                .ok_or_else(|| Error::Corrupt(format!("unknown activation tag {tag}")))?;
            headers.push((rows, cols, act));
        }
        let mut layers = Vec::with_capacity(count);
        for (rows, cols, act) in headers {
            let weights = self.f64s(rows * cols)?;
            let bias = self.f64s(rows)?;
            let weights = Matrix::from_vec(rows, cols, weights)
                .map_err(|e| Error::Corrupt(format!("bad weights: {e}")))?;
            if bias.iter().any(|v| !v.is_finite()) {
                return Err(Error::Corrupt("non-finite bias".into()));
            }
            layers.push(
                DenseLayer::new(weights, bias, act)
                    .map_err(|e| Error::Corrupt(format!("bad layer: {e}")))?,
            );
        }
        Mlp::new(layers).map_err(|e| Error::Corrupt(format!("inconsistent network: {e}")))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<RoundtripModel> {
    if bytes.len() < MAGIC.len() + 2 || &bytes[..4] != MAGIC {
        return Err(Error::Corrupt("missing RTDE header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < 10 {
        return Err(Error::Corrupt("file ends early".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Corrupt("checksum mismatch (truncated or altered file)".into()));
    }

    let mut r = Reader { bytes: body, pos: 6 };
    let m = r.u32()? as usize;
    let n = r.u32()? as usize;
    let sigma = r.f64()?;
    let g = r.net()?;
    let h = r.net()?;
    if g.input_dim() != m || g.output_dim() != n {
        return Err(Error::Corrupt(format!(
            "header says {m}→{n} but G maps {}→{}",
            g.input_dim(),
            g.output_dim()
        )));
    }
    let mut model =
        RoundtripModel::new(g, h, sigma).map_err(|e| Error::Corrupt(e.to_string()))?;
    let features = r.u32()? as usize;
    if features > 0 {
        let mut mins = Vec::with_capacity(features);
        let mut maxs = Vec::with_capacity(features);
        for _ in 0..features {
            mins.push(r.f64()?);
            maxs.push(r.f64()?);
        }
        let stats = NormStats::new(mins, maxs).map_err(|e| Error::Corrupt(e.to_string()))?;
        model = model
            .with_norm_stats(stats)
            .map_err(|e| Error::Corrupt(e.to_string()))?;
    }
    if r.pos != body.len() {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes",
            body.len() - r.pos
        )));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &RoundtripModel, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<RoundtripModel> {
    read_checkpoint(&fs::read(path)?)
}
