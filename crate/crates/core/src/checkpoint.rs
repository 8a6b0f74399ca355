//! Binary checkpoint of encoder parameters, optionally followed by a label
//! table and class names.
//!
//! ```text
//! "ALBL"  version:u32  layers:u32
//! per layer: rows:u32 cols:u32  weights:f64[rows*cols]  bias:f64[cols]
//! optional: "LBLS" classes:u32 dim:u32 vectors:f64[classes*dim]
//!           per class: len:u32 utf8[len]
//! ```
//! Integers and floats are little-endian; matrices are row-major.

use std::path::Path;

use crate::encoder::{Encoder, Linear, DEFAULT_HEAD_L2};
use crate::error::{Error, Result};
use crate::lwal::LabelTable;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ALBL";
pub const LABELS_TAG: &[u8; 4] = b"LBLS";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub encoder: Encoder,
    pub labels: Option<(LabelTable, Vec<String>)>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_encoder(encoder: &Encoder) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, encoder.layers().len() as u32);
    for l in encoder.layers() {
        put_u32(&mut out, l.weight.rows() as u32);
        put_u32(&mut out, l.weight.cols() as u32);
        put_f64s(&mut out, l.weight.data());
        put_f64s(&mut out, l.bias.data());
    }
    out
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = encode_encoder(&self.encoder);
        if let Some((table, names)) = &self.labels {
            out.extend_from_slice(LABELS_TAG);
            put_u32(&mut out, table.num_classes() as u32);
            put_u32(&mut out, table.latent_dim() as u32);
            put_f64s(&mut out, table.vectors().data());
            for name in names {
                put_u32(&mut out, name.len() as u32);
                out.extend_from_slice(name.as_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Data("checkpoint: bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Data(format!("checkpoint: unsupported version {version}")));
        }
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let weight = Tensor::matrix(rows, cols, r.f64s(rows * cols)?)?;
            let bias = Tensor::vector(r.f64s(cols)?)?;
            layers.push(Linear { weight, bias });
        }
        let encoder = Encoder::from_layers(DEFAULT_HEAD_L2, layers)?;
        let labels = if r.pos == bytes.len() {
            None
        } else {
            if r.take(4)? != LABELS_TAG {
                return Err(Error::Data("checkpoint: unknown trailing section".into()));
            }
            let n = r.u32()? as usize;
            let d = r.u32()? as usize;
            let table = LabelTable::from_vectors(Tensor::matrix(n, d, r.f64s(n * d)?)?)?;
            let mut names = Vec::with_capacity(n);
            for _ in 0..n {
                let len = r.u32()? as usize;
                let raw = r.take(len)?;
                names.push(
                    String::from_utf8(raw.to_vec()).map_err(|_| Error::Data("checkpoint: class name is not utf-8".into()))?,
                );
            }
            if r.pos != bytes.len() {
                return Err(Error::Data("checkpoint: trailing bytes".into()));
            }
            Some((table, names))
        };
        Ok(Checkpoint { encoder, labels })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&bytes).map_err(|e| match e {
            Error::Data(d) => Error::format(path, d),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Data("checkpoint: truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n.checked_mul(8).ok_or_else(|| Error::Data("checkpoint: size overflow".into()))?)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderConfig;

    #[test]
    fn header_layout() {
        let layer = Linear {
            weight: Tensor::from_rows(&[[1.0, 2.0]]).unwrap(),
            bias: Tensor::vector(vec![0.5, -0.5]).unwrap(),
        };
        let e = Encoder::from_layers(0.1, vec![layer]).unwrap();
        let bytes = encode_encoder(&e);
        assert_eq!(&bytes[..4], b"ALBL");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..28], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[36..44], &0.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 4 * 8);
    }

    #[test]
    fn round_trip_with_labels() {
        let e = Encoder::init(EncoderConfig { init_seed: 3, ..EncoderConfig::new(4, vec![5], 6) }).unwrap();
        let table = LabelTable::random(3, 6, 1).unwrap();
        let ck = Checkpoint {
            encoder: e,
            labels: Some((table, vec!["a".into(), "b c".into(), "é".into()])),
        };
        // the init seed is not persisted, so compare parameters and labels
        let back = Checkpoint::decode(&ck.encode()).unwrap();
        assert_eq!(back.encoder.layers(), ck.encoder.layers());
        assert_eq!(back.labels, ck.labels);
        let plain = Checkpoint { labels: None, ..ck };
        let back = Checkpoint::decode(&plain.encode()).unwrap();
        assert_eq!(back.encoder.layers(), plain.encoder.layers());
        assert!(back.labels.is_none());
    }

    #[test]
    fn rejects_corruption() {
        let e = Encoder::init(EncoderConfig::new(2, vec![], 2)).unwrap();
        let mut bytes = encode_encoder(&e);
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(Checkpoint::decode(&bytes).is_err());
    }
}
