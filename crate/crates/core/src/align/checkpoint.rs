//! `NCK1` checkpoint files.
//!
//! Same framing as the embedding banks (magic, version, JSON header,
//! little-endian `f32` payload). The payload is every trainable tensor in
//! [`AlignmentModel::params`] order, then all first moments in that order,
//! then all second moments.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochLog, ModelCheckpoint, TrainConfig};
use crate::data::{decode_container, encode_container, f32_payload, write_file};
use crate::error::{Error, Result};
use crate::tensor::{RngState, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"NCK1";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: TrainConfig,
    channels: usize,
    time_points: usize,
    image_dim: usize,
    epoch: usize,
    adam_step: u64,
    rng: RngState,
    tensors: Vec<TensorEntry>,
    payload_floats: usize,
    log: Vec<EpochLog>,
}

impl ModelCheckpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = self.model.params();
        let tensors = params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
            })
            .collect();
        let mut payload = Vec::new();
        for p in &params {
            payload.extend_from_slice(p.tensor.data());
        }
        for t in self.optimizer.m.iter().chain(&self.optimizer.v) {
            payload.extend_from_slice(t.data());
        }
        let header = CheckpointHeader {
            config: self.config.clone(),
            channels: self.channels,
            time_points: self.time_points,
            image_dim: self.image_dim,
            epoch: self.epoch,
            adam_step: self.optimizer.step,
            rng: self.rng,
            tensors,
            payload_floats: payload.len(),
            log: self.log.clone(),
        };
        encode_container(CHECKPOINT_MAGIC, &header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload): (CheckpointHeader, _) = decode_container(CHECKPOINT_MAGIC, bytes)?;
        let floats = f32_payload(payload, header.payload_floats)?;
        let mut ckpt = ModelCheckpoint::initial(
            &header.config,
            header.channels,
            header.time_points,
            header.image_dim,
        )?;
        {
            let layout = ckpt.model.params();
            if layout.len() != header.tensors.len()
                || layout
                    .iter()
                    .zip(&header.tensors)
                    .any(|(p, e)| p.name != e.name || p.tensor.shape() != e.shape.as_slice())
            {
                return Err(Error::Header(
                    "tensor table does not match the architecture in the config".into(),
                ));
            }
        }
        let per_block: usize = header.tensors.iter().map(|e| e.shape.iter().product::<usize>()).sum();
        if per_block * 3 != floats.len() {
            return Err(Error::SizeMismatch {
                declared: per_block * 3 * 4,
                actual: floats.len() * 4,
            });
        }
        let mut cursor = 0;
        let mut take = |shape: &[usize]| -> Result<Tensor<f32>> {
            let n: usize = shape.iter().product();
            let t = Tensor::new(shape.to_vec(), floats[cursor..cursor + n].to_vec())?;
            cursor += n;
            Ok(t)
        };
        for (slot, entry) in ckpt.model.params_mut().into_iter().zip(&header.tensors) {
            *slot = take(&entry.shape)?;
        }
        for (idx, entry) in header.tensors.iter().enumerate() {
            ckpt.optimizer.m[idx] = take(&entry.shape)?;
        }
        for (idx, entry) in header.tensors.iter().enumerate() {
            ckpt.optimizer.v[idx] = take(&entry.shape)?;
        }
        ckpt.optimizer.step = header.adam_step;
        ckpt.epoch = header.epoch;
        ckpt.rng = header.rng;
        ckpt.log = header.log;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
