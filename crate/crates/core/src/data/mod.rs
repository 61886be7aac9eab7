//! Manifests, binary embedding banks, neural-array ingestion, batching and
//! the synthetic data generator.

mod bank;
mod batch;
mod container;
mod manifest;
mod neural;
pub mod synth;

pub use bank::{read_bank, write_bank, EmbeddingBank, BANK_MAGIC};
pub use batch::{batch_iter, Batch, Batches, PairedData};
pub use container::FORMAT_VERSION;
pub(crate) use container::{decode as decode_container, encode as encode_container, f32_payload, write_file};
pub use manifest::{BankEntry, Category, Concept, ImageEntry, NeuralSource, PairManifest, Split};
pub use neural::{read_neural, select_channels, write_neural, zscore_channels, NeuralDataset, ZSCORE_EPS};
pub use synth::{synth_generate, LayerMix, SynthData, SynthSpec, MANIFEST_FILE};
