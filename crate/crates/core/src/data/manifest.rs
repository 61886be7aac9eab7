use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::NeuralDataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Animals,
    Food,
    Vehicles,
    Tools,
    Clothing,
    Others,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Animals,
        Category::Food,
        Category::Vehicles,
        Category::Tools,
        Category::Clothing,
        Category::Others,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub name: String,
    pub category: Category,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: String,
    pub concept_id: String,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralSource {
    pub subject: String,
    /// Path to a NEB1 neural array, relative to the manifest file.
    pub path: String,
    pub channel_names: Vec<String>,
    pub sampling_rate_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub backbone: String,
    pub layer_index: usize,
    pub path: String,
}

/// Binds neural recordings to stimulus images, concepts and splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub subjects: Vec<String>,
    pub concepts: Vec<Concept>,
    pub images: Vec<ImageEntry>,
    pub neural_sources: Vec<NeuralSource>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub banks: Vec<BankEntry>,
}

impl PairManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let manifest: Self = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        super::container::write_file(path.as_ref(), text.as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        let mut concepts = HashSet::new();
        for c in &self.concepts {
            if !concepts.insert(c.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate concept id {:?}", c.id)));
            }
        }
        let mut images = HashSet::new();
        let mut train = HashSet::new();
        let mut test = HashSet::new();
        for img in &self.images {
            if !images.insert(img.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate image id {:?}", img.id)));
            }
            if !concepts.contains(img.concept_id.as_str()) {
                return Err(Error::Manifest(format!(
                    "image {:?} references unknown concept {:?}",
                    img.id, img.concept_id
                )));
            }
            match img.split {
                Split::Train => train.insert(img.concept_id.as_str()),
                Split::Test => test.insert(img.concept_id.as_str()),
            };
        }
        if let Some(shared) = train.intersection(&test).next() {
            return Err(Error::Manifest(format!(
                "concept {shared:?} appears in both train and test splits"
            )));
        }
        for src in &self.neural_sources {
            if !self.subjects.contains(&src.subject) {
                return Err(Error::Manifest(format!(
                    "neural source for unknown subject {:?}",
                    src.subject
                )));
            }
        }
        Ok(())
    }

    pub fn image_ids(&self, split: Split) -> Vec<String> {
        self.images
            .iter()
            .filter(|i| i.split == split)
            .map(|i| i.id.clone())
            .collect()
    }

    /// One repetition-averaged row per `split` image, in manifest order.
    pub fn split_dataset(&self, dataset: &NeuralDataset, split: Split) -> Result<NeuralDataset> {
        dataset.average_repetitions_over(&self.image_ids(split))
    }

    pub fn concept_of_image(&self) -> HashMap<String, String> {
        self.images
            .iter()
            .map(|i| (i.id.clone(), i.concept_id.clone()))
            .collect()
    }

    pub fn category_of_image(&self) -> HashMap<String, Category> {
        let by_concept: HashMap<&str, Category> = self
            .concepts
            .iter()
            .map(|c| (c.id.as_str(), c.category))
            .collect();
        self.images
            .iter()
            .map(|i| (i.id.clone(), by_concept[i.concept_id.as_str()]))
            .collect()
    }

    pub fn source_for(&self, subject: &str) -> Result<&NeuralSource> {
        self.neural_sources
            .iter()
            .find(|s| s.subject == subject)
            .ok_or_else(|| Error::Manifest(format!("no neural source for subject {subject:?}")))
    }

    /// Resolves a manifest-relative path against the manifest's directory.
    pub fn resolve(manifest_path: &Path, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path
                .parent()
                .unwrap_or_else(|| Path::new(""))
                .join(p)
        }
    }
}
