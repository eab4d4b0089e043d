//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `COINCEPT`, a little-endian `u32` manifest length,
//! the UTF-8 JSON manifest, then the payload of little-endian IEEE-754
//! 32-bit values. Each tensor record in the manifest gives its name, shape
//! and byte offset into the payload; tensors are stored back to back in
//! parameter order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arraygrad::NdArray;
use crate::encoder::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::trainer::{Normalization, TrainConfig};

pub const MAGIC: &[u8; 8] = b"COINCEPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub iteration: usize,
    pub final_loss: f64,
    pub normalization: Normalization,
    pub params: EncoderParams<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    encoder: EncoderConfig,
    train: TrainConfig,
    iteration: usize,
    final_loss: f64,
    normalization: Normalization,
    tensors: Vec<TensorRecord>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptFile(msg.into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let mut tensors = Vec::new();
        for (name, value) in self.params.iter() {
            tensors.push(TensorRecord {
                name: name.to_string(),
                shape: value.shape().to_vec(),
                offset,
            });
            offset += 4 * value.len();
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            encoder: self.encoder.clone(),
            train: self.train.clone(),
            iteration: self.iteration,
            final_loss: self.final_loss,
            normalization: self.normalization.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&manifest)
            .map_err(|e| Error::InvalidArgument(format!("cannot serialize manifest: {e}")))?;
        let len = u32::try_from(json.len()).map_err(|_| Error::invalid("manifest too large"))?;
        let mut out = Vec::with_capacity(12 + json.len() + offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        for (_, value) in self.params.iter() {
            for v in value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint file (bad magic)"));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() < len {
            return Err(corrupt(format!("manifest truncated: {} of {len} bytes", body.len())));
        }
        let (json, payload) = body.split_at(len);
        let raw: serde_json::Value = serde_json::from_slice(json).map_err(|e| corrupt(format!("manifest: {e}")))?;
        let version = raw.get("format_version").and_then(serde_json::Value::as_u64);
        match version {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::UnsupportedVersion {
                    found: v as u32,
                    expected: FORMAT_VERSION,
                })
            }
            None => return Err(corrupt("manifest has no format_version")),
        }
        let manifest: Manifest = serde_json::from_value(raw).map_err(|e| corrupt(format!("manifest: {e}")))?;

        let mut named = Vec::with_capacity(manifest.tensors.len());
        let mut expected_offset = 0usize;
        for rec in manifest.tensors {
            if rec.offset != expected_offset {
                return Err(corrupt(format!(
                    "tensor {} at offset {}, expected {expected_offset}",
                    rec.name, rec.offset
                )));
            }
            let n: usize = rec.shape.iter().product();
            let end = rec.offset + 4 * n;
            if end > payload.len() {
                return Err(corrupt(format!(
                    "payload truncated: tensor {} needs bytes {}..{end}, payload has {}",
                    rec.name,
                    rec.offset,
                    payload.len()
                )));
            }
            let data = payload[rec.offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            named.push((rec.name, NdArray::new(rec.shape, data)?));
            expected_offset = end;
        }
        if expected_offset != payload.len() {
            return Err(corrupt(format!(
                "{} trailing payload bytes",
                payload.len() - expected_offset
            )));
        }
        let params = EncoderParams::from_named(&manifest.encoder, named)
            .map_err(|e| corrupt(format!("tensors do not fit the encoder config: {e}")))?;
        Ok(Checkpoint {
            encoder: manifest.encoder,
            train: manifest.train,
            iteration: manifest.iteration,
            final_loss: manifest.final_loss,
            normalization: manifest.normalization,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_params;

    fn sample() -> Checkpoint {
        let encoder = EncoderConfig {
            n_features: 2,
            hidden_dim: 3,
            output_dim: 4,
            n_blocks: 2,
            base_kernels: vec![2, 3],
            leaky_slope: 0.01,
        };
        let mut params = init_params::<f32>(&encoder, 11).unwrap();
        params.values_mut()[0].data_mut()[0] = f32::MIN_POSITIVE / 2.0;
        params.values_mut()[1].data_mut()[0] = -0.0;
        Checkpoint {
            encoder,
            train: TrainConfig::default(),
            iteration: 42,
            final_loss: 0.1 + 0.2,
            normalization: Normalization {
                mean: vec![1.0 / 3.0, -2.5],
                std: vec![std::f64::consts::PI, 1e-300],
            },
            params,
        }
    }

    fn manifest_of(bytes: &[u8]) -> (serde_json::Value, Vec<u8>) {
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let v = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
        (v, bytes[12 + len..].to_vec())
    }

    fn assemble(manifest: &serde_json::Value, payload: &[u8]) -> Vec<u8> {
        let json = serde_json::to_vec(manifest).unwrap();
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        assert_eq!(back.final_loss.to_bits(), ck.final_loss.to_bits());
        assert_eq!(back.normalization.std[1].to_bits(), 1e-300f64.to_bits());
        for ((_, a), (_, b)) in ck.params.iter().zip(back.params.iter()) {
            let ab: Vec<u32> = a.data().iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), ck.to_bytes().unwrap());
    }

    #[test]
    fn offsets_increase_within_payload() {
        let bytes = sample().to_bytes().unwrap();
        let (m, payload) = manifest_of(&bytes);
        let offsets: Vec<u64> = m["tensors"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t["offset"].as_u64().unwrap())
            .collect();
        assert!(offsets.windows(2).all(|w| w[0] < w[1]));
        assert!((*offsets.last().unwrap() as usize) < payload.len());
    }

    #[test]
    fn version_mismatch_is_reported() {
        let bytes = sample().to_bytes().unwrap();
        let (mut m, payload) = manifest_of(&bytes);
        m["format_version"] = 7.into();
        let err = Checkpoint::from_bytes(&assemble(&m, &payload)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedVersion { found: 7, expected: 1 }));
    }

    #[test]
    fn truncation_is_corrupt() {
        let bytes = sample().to_bytes().unwrap();
        for cut in [4, 20, bytes.len() - 1] {
            let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::CorruptFile(_)), "cut {cut}: {err}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Checkpoint::from_bytes(&long), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn unknown_manifest_field_is_named() {
        let bytes = sample().to_bytes().unwrap();
        let (mut m, payload) = manifest_of(&bytes);
        m["colour"] = "blue".into();
        let err = Checkpoint::from_bytes(&assemble(&m, &payload)).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ck = sample();
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }
}
