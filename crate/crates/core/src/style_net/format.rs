//! Binary weight file format.
//!
//! Layout (all integers little-endian): magic `FNET`, u32 version, u32 class
//! count, length-prefixed UTF-8 class labels, u32 layer count, then per
//! layer a u8 kind tag, u32 dimensions, and the parameter payload as 32-bit
//! floats in row-major (out, in, kh, kw) order. The final 4 bytes are a
//! CRC-32 of everything preceding them.

use std::fs;
use std::path::Path;

use crate::nn::{ChannelNorm, Conv, DepthwiseSepConv, Layer, MaxPool};

use super::{StyleError, StyleNet};

pub const FORMAT_MAGIC: &[u8; 4] = b"FNET";
pub const FORMAT_VERSION: u32 = 1;

const KIND_CONV: u8 = 0;
const KIND_SEP_CONV: u8 = 1;
const KIND_MAX_POOL: u8 = 2;
const KIND_CHANNEL_NORM: u8 = 3;
const KIND_SOFTMAX: u8 = 4;
const KIND_RELU: u8 = 5;

impl StyleNet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(FORMAT_MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, self.labels.len() as u32);
        for label in &self.labels {
            put_u32(&mut out, label.len() as u32);
            out.extend_from_slice(label.as_bytes());
        }
        put_u32(&mut out, self.layers.len() as u32);
        for layer in &self.layers {
            match layer {
                Layer::Conv(l) => {
                    out.push(KIND_CONV);
                    for d in [l.in_channels, l.out_channels, l.kernel.0, l.kernel.1, l.stride.0, l.stride.1] {
                        put_u32(&mut out, d as u32);
                    }
                    put_f32s(&mut out, &l.weights);
                    put_f32s(&mut out, &l.bias);
                }
                Layer::DepthwiseSepConv(l) => {
                    out.push(KIND_SEP_CONV);
                    for d in [l.in_channels, l.out_channels, l.kernel.0, l.kernel.1, l.stride.0, l.stride.1] {
                        put_u32(&mut out, d as u32);
                    }
                    put_f32s(&mut out, &l.depthwise);
                    put_f32s(&mut out, &l.pointwise);
                    put_f32s(&mut out, &l.bias);
                }
                Layer::MaxPool(l) => {
                    out.push(KIND_MAX_POOL);
                    for d in [l.kernel.0, l.kernel.1, l.stride.0, l.stride.1] {
                        put_u32(&mut out, d as u32);
                    }
                }
                Layer::ChannelNorm(l) => {
                    out.push(KIND_CHANNEL_NORM);
                    put_u32(&mut out, l.channels as u32);
                    put_f32s(&mut out, &l.gamma);
                    put_f32s(&mut out, &l.beta);
                    put_f32s(&mut out, &l.running_mean);
                    put_f32s(&mut out, &l.running_var);
                }
                Layer::Softmax => out.push(KIND_SOFTMAX),
                Layer::Relu => out.push(KIND_RELU),
            }
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StyleError> {
        // Anything shorter than magic + version + checksum is a truncation.
        if bytes.len() < 12 {
            return Err(StyleError::ChecksumMismatch);
        }
        if &bytes[0..4] != FORMAT_MAGIC {
            return Err(StyleError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(StyleError::FormatVersionMismatch { found: version });
        }
        let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32fast::hash(&bytes[..bytes.len() - 4]) != stored_crc {
            return Err(StyleError::ChecksumMismatch);
        }

        let mut r = Reader { bytes: &bytes[..bytes.len() - 4], pos: 8 };
        let class_count = r.u32()? as usize;
        let mut labels = Vec::with_capacity(class_count);
        for _ in 0..class_count {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            let label = std::str::from_utf8(raw)
                .map_err(|_| StyleError::Corrupt("class label is not UTF-8".into()))?;
            labels.push(label.to_owned());
        }
        let layer_count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            let kind = r.u8()?;
            let layer = match kind {
                KIND_CONV => {
                    let dims = r.dims::<6>()?;
                    let (ic, oc, kh, kw) = (dims[0], dims[1], dims[2], dims[3]);
                    let weights = r.f32s(oc * ic * kh * kw)?;
                    let bias = r.f32s(oc)?;
                    Layer::Conv(
                        Conv::new(ic, oc, (kh, kw), (dims[4], dims[5]), weights, bias)
                            .map_err(|e| StyleError::Corrupt(e.to_string()))?,
                    )
                }
                KIND_SEP_CONV => {
                    let dims = r.dims::<6>()?;
                    let (ic, oc, kh, kw) = (dims[0], dims[1], dims[2], dims[3]);
                    let depthwise = r.f32s(ic * kh * kw)?;
                    let pointwise = r.f32s(oc * ic)?;
                    let bias = r.f32s(oc)?;
                    Layer::DepthwiseSepConv(
                        DepthwiseSepConv::new(ic, oc, (kh, kw), (dims[4], dims[5]), depthwise, pointwise, bias)
                            .map_err(|e| StyleError::Corrupt(e.to_string()))?,
                    )
                }
                KIND_MAX_POOL => {
                    let dims = r.dims::<4>()?;
                    Layer::MaxPool(MaxPool { kernel: (dims[0], dims[1]), stride: (dims[2], dims[3]) })
                }
                KIND_CHANNEL_NORM => {
                    let channels = r.u32()? as usize;
                    let mut norm = ChannelNorm::new(channels);
                    norm.gamma = r.f32s(channels)?;
                    norm.beta = r.f32s(channels)?;
                    norm.running_mean = r.f32s(channels)?;
                    norm.running_var = r.f32s(channels)?;
                    Layer::ChannelNorm(norm)
                }
                KIND_SOFTMAX => Layer::Softmax,
                KIND_RELU => Layer::Relu,
                other => return Err(StyleError::Corrupt(format!("unknown layer kind tag {other}"))),
            };
            layers.push(layer);
        }
        if r.pos != r.bytes.len() {
            return Err(StyleError::Corrupt("trailing bytes after layer payload".into()));
        }
        StyleNet::from_layers(layers, labels)
            .map_err(|e| StyleError::Corrupt(format!("stored model invalid: {e}")))
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), StyleError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, StyleError> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StyleError> {
        if self.pos + n > self.bytes.len() {
            return Err(StyleError::Corrupt("unexpected end of payload".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, StyleError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, StyleError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn dims<const N: usize>(&mut self) -> Result<[usize; N], StyleError> {
        let mut out = [0usize; N];
        for d in &mut out {
            *d = self.u32()? as usize;
        }
        Ok(out)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, StyleError> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
