//! Synthetic paired data with a controllable concept/instance balance per
//! layer.
//!
//! Layer `ℓ` embeds image `i` of concept `c` as
//! `α_ℓ·µ_c + β_ℓ·d_i + σ_ℓ·ε_{ℓ,i}`. With `β = 0` at the last layer every
//! concept collapses onto its center and final-layer targets cannot separate
//! images within a concept. The neural signal is a fixed random linear
//! read-out of `(µ_c, d_i)` plus noise and always carries instance detail.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{Category, Concept, ImageEntry, NeuralSource, PairManifest, Split};
use super::{write_bank, write_neural, BankEntry, EmbeddingBank, NeuralDataset};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMix {
    /// Weight on the concept center.
    pub concept: f64,
    /// Weight on the per-image detail vector.
    pub detail: f64,
    /// Scale of layer-specific noise no neural signal can predict.
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_concepts: usize,
    pub test_concepts: usize,
    pub images_per_concept: usize,
    pub layers: Vec<LayerMix>,
    pub embed_dim: usize,
    pub channels: usize,
    pub time_points: usize,
    /// Share of each concept center explained by its category center.
    pub category_weight: f64,
    pub neural_concept_weight: f64,
    pub neural_detail_weight: f64,
    pub neural_noise: f64,
    /// Trials recorded per image before averaging.
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_concepts: 1000,
            test_concepts: 200,
            images_per_concept: 10,
            layers: default_schedule(6),
            embed_dim: 32,
            channels: 8,
            time_points: 16,
            category_weight: 0.5,
            neural_concept_weight: 1.0,
            neural_detail_weight: 1.0,
            neural_noise: 0.3,
            repetitions: 1,
            seed: 7,
        }
    }
}

/// Concept weight rising, detail weight falling to exactly zero, noise
/// decaying from the first layer.
pub fn default_schedule(num_layers: usize) -> Vec<LayerMix> {
    (0..num_layers)
        .map(|i| {
            let t = if num_layers > 1 {
                i as f64 / (num_layers - 1) as f64
            } else {
                1.0
            };
            LayerMix {
                concept: 0.25 + 0.75 * t,
                detail: if i + 1 == num_layers { 0.0 } else { 1.0 - t * t },
                noise: 1.5 * (1.0 - t) * (1.0 - t),
            }
        })
        .collect()
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.layers.len() < 3 {
            return bad(format!("need at least 3 layers, got {}", self.layers.len()));
        }
        if self.layers.last().unwrap().detail != 0.0 {
            return bad("final layer must have zero detail weight (collapsed concepts)".into());
        }
        let inner = &self.layers[1..self.layers.len() - 1];
        if !inner.iter().any(|l| l.concept > 0.0 && l.detail > 0.0) {
            return bad("no intermediate layer mixes concept and detail".into());
        }
        if self
            .layers
            .iter()
            .any(|l| l.concept < 0.0 || l.detail < 0.0 || l.noise < 0.0)
        {
            return bad("layer weights must be non-negative".into());
        }
        if self.test_concepts == 0 || self.test_concepts >= self.num_concepts {
            return bad(format!(
                "test concepts {} must be in 1..{}",
                self.test_concepts, self.num_concepts
            ));
        }
        if self.images_per_concept == 0 || self.repetitions == 0 {
            return bad("images per concept and repetitions must be positive".into());
        }
        if self.embed_dim < 2 || self.channels == 0 || self.time_points == 0 {
            return bad("dimensions must be positive (embedding dim ≥ 2)".into());
        }
        Ok(())
    }
}

pub struct SynthData {
    /// Raw trials, `repetitions` per image.
    pub dataset: NeuralDataset,
    /// One bank per layer; the last is the final output.
    pub banks: Vec<EmbeddingBank>,
    pub manifest: PairManifest,
}

impl SynthData {
    /// Writes `manifest.json`, the neural NEB1 file and one bank per layer
    /// under `dir`; returns the manifest path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        for src in &self.manifest.neural_sources {
            let path = PairManifest::resolve(&manifest_path, &src.path);
            create_parent(&path)?;
            write_neural(&self.dataset, &path)?;
        }
        for (entry, bank) in self.manifest.banks.iter().zip(&self.banks) {
            let path = PairManifest::resolve(&manifest_path, &entry.path);
            create_parent(&path)?;
            write_bank(bank, &path)?;
        }
        create_parent(&manifest_path)?;
        self.manifest.save(&manifest_path)?;
        Ok(manifest_path)
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SYNTH_SUBJECT: &str = "sub-01";
pub const SYNTH_BACKBONE: &str = "synthetic";

pub fn concept_id(c: usize) -> String {
    format!("c{c:04}")
}

pub fn image_id(c: usize, i: usize) -> String {
    format!("c{c:04}_i{i:03}")
}

pub fn bank_file_name(layer_index: usize) -> String {
    format!("banks/layer_{layer_index:02}.neb")
}

pub const NEURAL_FILE: &str = "neural/sub-01.neb";

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let d = spec.embed_dim;
    let k = spec.num_concepts;
    let per = spec.images_per_concept;
    let n_images = k * per;

    let category_centers: Vec<Vec<f64>> = Category::ALL
        .iter()
        .map(|_| (0..d).map(|_| rng.normal()).collect())
        .collect();
    let cw = spec.category_weight;
    let own = (1.0 - cw * cw).max(0.0).sqrt();
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let g = &category_centers[c % Category::ALL.len()];
            (0..d).map(|j| cw * g[j] + own * rng.normal()).collect()
        })
        .collect();
    let details: Vec<Vec<f64>> = (0..n_images)
        .map(|_| (0..d).map(|_| rng.normal()).collect())
        .collect();

    let mut concept_order: Vec<usize> = (0..k).collect();
    rng.shuffle(&mut concept_order);
    let mut is_test = vec![false; k];
    for &c in &concept_order[..spec.test_concepts] {
        is_test[c] = true;
    }

    let image_ids: Vec<String> = (0..k)
        .flat_map(|c| (0..per).map(move |i| image_id(c, i)))
        .collect();

    let mut banks = Vec::with_capacity(spec.layers.len());
    let num_layers = spec.layers.len();
    for (li, mix) in spec.layers.iter().enumerate() {
        let mut data = Vec::with_capacity(n_images * d);
        for img in 0..n_images {
            let c = img / per;
            for j in 0..d {
                let noise = if mix.noise > 0.0 { rng.normal() } else { 0.0 };
                let v = mix.concept * centers[c][j] + mix.detail * details[img][j] + mix.noise * noise;
                data.push(v as f32);
            }
        }
        banks.push(EmbeddingBank::new(
            SYNTH_BACKBONE,
            li + 1,
            num_layers,
            "synthetic",
            image_ids.clone(),
            Tensor::new(vec![n_images, d], data)?,
        )?);
    }

    let width = spec.channels * spec.time_points;
    let mix_std = 1.0 / ((2 * d) as f64).sqrt();
    let readout: Vec<f64> = (0..width * 2 * d).map(|_| rng.normal() * mix_std).collect();
    let n_trials = n_images * spec.repetitions;
    let mut trials = Vec::with_capacity(n_trials * width);
    let mut trial_ids = Vec::with_capacity(n_trials);
    let mut latent = vec![0.0; 2 * d];
    for _rep in 0..spec.repetitions {
        for img in 0..n_images {
            let c = img / per;
            for j in 0..d {
                latent[j] = spec.neural_concept_weight * centers[c][j];
                latent[d + j] = spec.neural_detail_weight * details[img][j];
            }
            for r in 0..width {
                let row = &readout[r * 2 * d..(r + 1) * 2 * d];
                let clean: f64 = row.iter().zip(&latent).map(|(a, b)| a * b).sum();
                trials.push((clean + spec.neural_noise * rng.normal()) as f32);
            }
            trial_ids.push(image_ids[img].clone());
        }
    }
    let channel_names: Vec<String> = (0..spec.channels).map(|c| format!("ch{c:02}")).collect();
    let dataset = NeuralDataset::new(
        SYNTH_SUBJECT,
        channel_names.clone(),
        250.0,
        Tensor::new(vec![n_trials, spec.channels, spec.time_points], trials)?,
        trial_ids,
    )?;

    let manifest = PairManifest {
        subjects: vec![SYNTH_SUBJECT.into()],
        concepts: (0..k)
            .map(|c| Concept {
                id: concept_id(c),
                name: format!("concept {c}"),
                category: Category::ALL[c % Category::ALL.len()],
            })
            .collect(),
        images: (0..n_images)
            .map(|img| ImageEntry {
                id: image_ids[img].clone(),
                concept_id: concept_id(img / per),
                split: if is_test[img / per] {
                    Split::Test
                } else {
                    Split::Train
                },
            })
            .collect(),
        neural_sources: vec![NeuralSource {
            subject: SYNTH_SUBJECT.into(),
            path: NEURAL_FILE.into(),
            channel_names,
            sampling_rate_hz: 250.0,
        }],
        banks: (1..=num_layers)
            .map(|l| BankEntry {
                backbone: SYNTH_BACKBONE.into(),
                layer_index: l,
                path: bank_file_name(l),
            })
            .collect(),
    };
    manifest.validate()?;
    Ok(SynthData {
        dataset,
        banks,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            num_concepts: 12,
            test_concepts: 3,
            images_per_concept: 4,
            embed_dim: 8,
            channels: 2,
            time_points: 4,
            ..SynthSpec::default()
        }
    }

    fn dist(a: &[f32], b: &[f32]) -> f32 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f32>().sqrt()
    }

    #[test]
    fn written_files_reload_identically() {
        let data = synth_generate(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = data.write(dir.path()).unwrap();
        let manifest = PairManifest::load(&path).unwrap();
        assert_eq!(manifest, data.manifest);
        let neural = crate::data::read_neural(PairManifest::resolve(&path, NEURAL_FILE)).unwrap();
        assert_eq!(neural, data.dataset);
        for (entry, bank) in manifest.banks.iter().zip(&data.banks) {
            let back = crate::data::read_bank(PairManifest::resolve(&path, &entry.path)).unwrap();
            assert_eq!(&back, bank);
        }
    }

    #[test]
    fn nonzero_final_detail_rejected() {
        let mut spec = small();
        spec.layers.last_mut().unwrap().detail = 0.1;
        assert!(matches!(synth_generate(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn collapsed_layer_shares_one_embedding_per_concept() {
        let mut spec = small();
        spec.layers[2] = LayerMix {
            concept: 1.0,
            detail: 0.0,
            noise: 0.0,
        };
        let out = synth_generate(&spec).unwrap();
        for bank in [&out.banks[2], out.banks.last().unwrap()] {
            for c in 0..spec.num_concepts {
                let first = bank.matrix.row(c * 4);
                for i in 1..4 {
                    assert_eq!(bank.matrix.row(c * 4 + i), first);
                }
            }
        }
    }

    #[test]
    fn detail_keeps_images_apart_and_is_seeded() {
        let mut spec = small();
        spec.layers = vec![
            LayerMix { concept: 1.0, detail: 1.0, noise: 0.0 },
            LayerMix { concept: 1.0, detail: 1.0, noise: 0.0 },
            LayerMix { concept: 1.0, detail: 0.0, noise: 0.0 },
        ];
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        let m = &a.banks[0].matrix;
        for c in 0..spec.num_concepts {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    assert!(dist(m.row(c * 4 + i), m.row(c * 4 + j)) > 0.0);
                }
            }
        }
        for (x, y) in a.banks.iter().zip(&b.banks) {
            assert_eq!(x, y);
        }
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        let out = synth_generate(&small()).unwrap();
        let test = out.manifest.image_ids(Split::Test);
        assert_eq!(test.len(), 3 * 4);
        assert_eq!(out.manifest.image_ids(Split::Train).len(), 9 * 4);
        out.manifest.validate().unwrap();
    }
}
