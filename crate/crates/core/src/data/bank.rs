use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{self, f32_payload};
use crate::error::{Error, Result};
use crate::eval::relative_depth;
use crate::tensor::Tensor;

pub const BANK_MAGIC: [u8; 4] = *b"NEB1";

/// Pooled visual embeddings of one backbone layer, one row per image.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingBank {
    pub backbone_name: String,
    /// 1-based layer index.
    pub layer_index: usize,
    pub num_layers: usize,
    pub pooling_tag: String,
    pub item_ids: Vec<String>,
    pub matrix: Tensor<f32>,
    /// Extra header keys (e.g. preprocessing notes written by the extractor),
    /// carried through untouched.
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct BankHeader {
    backbone_name: String,
    layer_index: usize,
    num_layers: usize,
    relative_depth: f64,
    pooling_tag: String,
    dim: usize,
    count: usize,
    dtype: String,
    item_ids: Vec<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

impl EmbeddingBank {
    pub fn new(
        backbone_name: impl Into<String>,
        layer_index: usize,
        num_layers: usize,
        pooling_tag: impl Into<String>,
        item_ids: Vec<String>,
        matrix: Tensor<f32>,
    ) -> Result<Self> {
        let bank = Self {
            backbone_name: backbone_name.into(),
            layer_index,
            num_layers,
            pooling_tag: pooling_tag.into(),
            item_ids,
            matrix,
            extra: BTreeMap::new(),
        };
        bank.validate()?;
        Ok(bank)
    }

    pub fn count(&self) -> usize {
        self.item_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape().get(1).copied().unwrap_or(0)
    }

    pub fn relative_depth(&self) -> Result<f64> {
        relative_depth(self.layer_index, self.num_layers)
    }

    pub fn is_final(&self) -> bool {
        self.layer_index == self.num_layers
    }

    pub fn validate(&self) -> Result<()> {
        let (rows, _) = self.matrix.dims2("EmbeddingBank")?;
        if rows != self.item_ids.len() {
            return Err(Error::Header(format!(
                "{} item ids for {rows} rows",
                self.item_ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(rows);
        if let Some(dup) = self.item_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Header(format!("duplicate item id {dup:?}")));
        }
        self.relative_depth()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let header = BankHeader {
            backbone_name: self.backbone_name.clone(),
            layer_index: self.layer_index,
            num_layers: self.num_layers,
            relative_depth: self.relative_depth()?,
            pooling_tag: self.pooling_tag.clone(),
            dim: self.dim(),
            count: self.count(),
            dtype: "f32".into(),
            item_ids: self.item_ids.clone(),
            extra: self.extra.clone(),
        };
        container::encode(BANK_MAGIC, &header, self.matrix.data())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload): (BankHeader, _) = container::decode(BANK_MAGIC, bytes)?;
        if header.dtype != "f32" {
            return Err(Error::Header(format!("unsupported dtype {:?}", header.dtype)));
        }
        if header.item_ids.len() != header.count {
            return Err(Error::Header(format!(
                "count {} but {} item ids",
                header.count,
                header.item_ids.len()
            )));
        }
        let depth = relative_depth(header.layer_index, header.num_layers)?;
        if depth != header.relative_depth {
            return Err(Error::Header(format!(
                "stored relative depth {} disagrees with ({} - 1)/({} - 1) = {depth}",
                header.relative_depth, header.layer_index, header.num_layers
            )));
        }
        let data = f32_payload(payload, header.count * header.dim)?;
        let matrix = Tensor::new(vec![header.count, header.dim], data)?;
        let bank = Self {
            backbone_name: header.backbone_name,
            layer_index: header.layer_index,
            num_layers: header.num_layers,
            pooling_tag: header.pooling_tag,
            item_ids: header.item_ids,
            matrix,
            extra: header.extra,
        };
        bank.validate()?;
        Ok(bank)
    }
}

pub fn write_bank(bank: &EmbeddingBank, path: impl AsRef<Path>) -> Result<()> {
    container::write_file(path.as_ref(), &bank.to_bytes()?)
}

pub fn read_bank(path: impl AsRef<Path>) -> Result<EmbeddingBank> {
    EmbeddingBank::from_bytes(&std::fs::read(path)?)
}
