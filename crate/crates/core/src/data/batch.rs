use std::collections::HashMap;

use super::{EmbeddingBank, NeuralDataset};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

/// Neural trials aligned row-for-row with their bank embeddings.
#[derive(Clone, Debug)]
pub struct Batch {
    pub neural: Tensor<f32>,
    pub embeddings: Tensor<f32>,
    pub image_ids: Vec<String>,
}

/// A neural dataset joined to an embedding bank by image id.
#[derive(Clone, Debug)]
pub struct PairedData<'a> {
    pub dataset: &'a NeuralDataset,
    pub bank: &'a EmbeddingBank,
    bank_rows: Vec<usize>,
}

impl<'a> PairedData<'a> {
    pub fn new(dataset: &'a NeuralDataset, bank: &'a EmbeddingBank) -> Result<Self> {
        let index: HashMap<&str, usize> = bank
            .item_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let bank_rows = dataset
            .image_ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::MissingItem(id.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dataset,
            bank,
            bank_rows,
        })
    }

    pub fn len(&self) -> usize {
        self.bank_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bank_rows.is_empty()
    }

    /// Gathers the given dataset rows into one batch.
    pub fn gather(&self, rows: &[usize]) -> Batch {
        let bank_rows: Vec<usize> = rows.iter().map(|&r| self.bank_rows[r]).collect();
        Batch {
            neural: self.dataset.trials.select_rows(rows),
            embeddings: self.bank.matrix.select_rows(&bank_rows),
            image_ids: rows.iter().map(|&r| self.dataset.image_ids[r].clone()).collect(),
        }
    }

    /// All pairs as a single batch, in dataset order.
    pub fn all(&self) -> Batch {
        self.gather(&(0..self.len()).collect::<Vec<_>>())
    }

    /// One epoch of batches. With `rng`, the visiting order is a fresh
    /// shuffle drawn from it; without, dataset order.
    pub fn batches(&self, batch_size: usize, rng: Option<&mut Rng>) -> Result<Batches<'_, 'a>> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        if let Some(rng) = rng {
            rng.shuffle(&mut order);
        }
        Ok(Batches {
            pairs: self,
            order,
            batch_size,
            pos: 0,
        })
    }
}

pub struct Batches<'p, 'a> {
    pairs: &'p PairedData<'a>,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Batches<'_, '_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.pairs.gather(&self.order[self.pos..end]);
        self.pos = end;
        Some(batch)
    }
}

/// Convenience wrapper: join, then iterate one epoch.
pub fn batch_iter(
    dataset: &NeuralDataset,
    bank: &EmbeddingBank,
    batch_size: usize,
    rng: &mut Rng,
    shuffle: bool,
) -> Result<Vec<Batch>> {
    let pairs = PairedData::new(dataset, bank)?;
    let batches = pairs.batches(batch_size, shuffle.then_some(rng))?;
    Ok(batches.collect())
}
