use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{concept_accuracy, relative_depth, retrieve_topk, topk_accuracy, RetrievalReport, SweepResult};
use crate::align::{fit, AlignmentModel, ModelCheckpoint, TrainConfig};
use crate::data::{Category, EmbeddingBank, NeuralDataset, PairedData};
use crate::error::Result;
use crate::tensor::derive_seed;

/// Zero-shot retrieval of each test image from its neural response.
/// Queries are projected neural embeddings; candidates are the projected
/// embeddings of the same test images, so query `i` should retrieve `i`.
pub fn evaluate(
    model: &AlignmentModel<f32>,
    test: &PairedData<'_>,
    categories: &HashMap<String, Category>,
) -> Result<RetrievalReport> {
    let batch = test.all();
    let v = model.embed_neural(&batch.neural)?;
    let w = model.embed_images(&batch.embeddings)?;
    let n = batch.image_ids.len();
    let k = n.min(5);
    let rankings = retrieve_topk(&v, &w, k)?;
    let truth: Vec<usize> = (0..n).collect();
    let bank = test.bank;
    Ok(RetrievalReport {
        subject_id: test.dataset.subject_id.clone(),
        backbone: bank.backbone_name.clone(),
        layer_index: bank.layer_index,
        num_layers: bank.num_layers,
        relative_depth: relative_depth(bank.layer_index, bank.num_layers)?,
        top1: topk_accuracy(&rankings, &truth, 1),
        top5: topk_accuracy(&rankings, &truth, 5),
        concept_accuracy: concept_accuracy(&rankings, &truth, &batch.image_ids, categories)?,
        num_queries: n,
    })
}

/// Seed used for the run on `layer_index`.
pub fn layer_seed(seed: u64, layer_index: usize) -> u64 {
    derive_seed(seed, layer_index as u64)
}

/// Trains and evaluates one fresh model per bank. Each layer's run starts
/// from its own seed ([`layer_seed`]), so runs are independent of each
/// other and of the order banks are given in.
pub fn layer_sweep(
    train: &NeuralDataset,
    test: &NeuralDataset,
    banks: &[EmbeddingBank],
    config: &TrainConfig,
    categories: &HashMap<String, Category>,
    on_layer: impl FnMut(&ModelCheckpoint, &RetrievalReport),
) -> Result<SweepResult> {
    layer_sweep_threads(train, test, banks, config, categories, 1, on_layer)
}

/// [`layer_sweep`] with up to `threads` layers trained concurrently.
/// `on_layer` still sees layers in bank order and results are identical
/// for every thread count.
pub fn layer_sweep_threads(
    train: &NeuralDataset,
    test: &NeuralDataset,
    banks: &[EmbeddingBank],
    config: &TrainConfig,
    categories: &HashMap<String, Category>,
    threads: usize,
    mut on_layer: impl FnMut(&ModelCheckpoint, &RetrievalReport),
) -> Result<SweepResult> {
    let run = |bank: &EmbeddingBank| -> Result<(ModelCheckpoint, RetrievalReport)> {
        let train_pairs = PairedData::new(train, bank)?;
        let test_pairs = PairedData::new(test, bank)?;
        let layer_config = TrainConfig {
            seed: layer_seed(config.seed, bank.layer_index),
            ..config.clone()
        };
        let ckpt = fit(&train_pairs, Some(&test_pairs), &layer_config, |_| {})?;
        let report = evaluate(&ckpt.model, &test_pairs, categories)?;
        Ok((ckpt, report))
    };

    let threads = threads.clamp(1, banks.len().max(1));
    let mut reports = Vec::with_capacity(banks.len());
    if threads == 1 {
        for bank in banks {
            let (ckpt, report) = run(bank)?;
            on_layer(&ckpt, &report);
            reports.push(report);
        }
    } else {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<(ModelCheckpoint, RetrievalReport)>>>> =
            banks.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= banks.len() {
                        break;
                    }
                    let out = run(&banks[i]);
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(out);
                });
            }
        });
        for slot in slots {
            let out = slot.into_inner().unwrap_or_else(|e| e.into_inner());
            let (ckpt, report) = out.expect("every bank index is claimed by a worker")?;
            on_layer(&ckpt, &report);
            reports.push(report);
        }
    }
    SweepResult::from_reports(reports)
}
