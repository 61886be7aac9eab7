//! Ingestion of preprocessed neural arrays: trial averaging, channel
//! selection and channel-wise z-scoring.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{self, f32_payload};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NEURAL_MAGIC: [u8; 4] = *b"NEB1";
pub const ZSCORE_EPS: f64 = 1e-8;

/// Trials of one subject, `trials: [n, C, T]`, with the stimulus image of
/// each trial.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralDataset {
    pub subject_id: String,
    pub channel_names: Vec<String>,
    pub sampling_rate_hz: f64,
    pub trials: Tensor<f32>,
    pub image_ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NeuralHeader {
    kind: String,
    subject_id: String,
    channels: usize,
    time_points: usize,
    channel_names: Vec<String>,
    sampling_rate_hz: f64,
    dim: usize,
    count: usize,
    dtype: String,
    item_ids: Vec<String>,
}

impl NeuralDataset {
    pub fn new(
        subject_id: impl Into<String>,
        channel_names: Vec<String>,
        sampling_rate_hz: f64,
        trials: Tensor<f32>,
        image_ids: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            subject_id: subject_id.into(),
            channel_names,
            sampling_rate_hz,
            trials,
            image_ids,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let [n, c, _] = self.dims()?;
        if n != self.image_ids.len() {
            return Err(Error::shape(
                "NeuralDataset",
                format!("{n} trials but {} image ids", self.image_ids.len()),
            ));
        }
        if c != self.channel_names.len() {
            return Err(Error::shape(
                "NeuralDataset",
                format!("{c} channels but {} names", self.channel_names.len()),
            ));
        }
        Ok(())
    }

    /// `[n, C, T]`.
    pub fn dims(&self) -> Result<[usize; 3]> {
        match self.trials.shape() {
            &[n, c, t] => Ok([n, c, t]),
            s => Err(Error::shape("NeuralDataset", format!("expected [n, C, T], got {s:?}"))),
        }
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn time_points(&self) -> usize {
        self.trials.shape()[2]
    }

    pub fn len(&self) -> usize {
        self.image_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_ids.is_empty()
    }

    /// Averages repetitions, emitting images in order of first appearance.
    pub fn average_repetitions(&self) -> Result<Self> {
        let mut order = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for id in &self.image_ids {
            if seen.insert(id.as_str()) {
                order.push(id.clone());
            }
        }
        self.average_repetitions_over(&order)
    }

    /// Averages repetitions for the listed images, in the listed order.
    pub fn average_repetitions_over(&self, images: &[String]) -> Result<Self> {
        let [_, c, t] = self.dims()?;
        let width = c * t;
        let mut trials_of: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, id) in self.image_ids.iter().enumerate() {
            trials_of.entry(id.as_str()).or_default().push(i);
        }
        let mut data = Vec::with_capacity(images.len() * width);
        let mut acc = vec![0f64; width];
        for id in images {
            let rows = trials_of
                .get(id.as_str())
                .ok_or_else(|| Error::NoTrials(id.clone()))?;
            acc.iter_mut().for_each(|v| *v = 0.0);
            for &r in rows {
                for (a, &v) in acc.iter_mut().zip(self.trials.row(r)) {
                    *a += v as f64;
                }
            }
            let k = rows.len() as f64;
            data.extend(acc.iter().map(|&a| (a / k) as f32));
        }
        Self::new(
            self.subject_id.clone(),
            self.channel_names.clone(),
            self.sampling_rate_hz,
            Tensor::new(vec![images.len(), c, t], data)?,
            images.to_vec(),
        )
    }

    pub fn zscore_channels(&self) -> Result<Self> {
        Ok(Self {
            trials: zscore_channels(&self.trials)?,
            ..self.clone()
        })
    }

    pub fn select_channels(&self, keep: &[String]) -> Result<Self> {
        Ok(Self {
            trials: select_channels(&self.trials, &self.channel_names, keep)?,
            channel_names: keep.to_vec(),
            ..self.clone()
        })
    }

    /// Keeps the trials whose image is in `images`, in dataset order.
    pub fn filter_images(&self, images: &std::collections::HashSet<String>) -> Self {
        let rows: Vec<usize> = (0..self.len())
            .filter(|&i| images.contains(&self.image_ids[i]))
            .collect();
        Self {
            trials: self.trials.select_rows(&rows),
            image_ids: rows.iter().map(|&i| self.image_ids[i].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let [n, c, t] = self.dims()?;
        let header = NeuralHeader {
            kind: "neural".into(),
            subject_id: self.subject_id.clone(),
            channels: c,
            time_points: t,
            channel_names: self.channel_names.clone(),
            sampling_rate_hz: self.sampling_rate_hz,
            dim: c * t,
            count: n,
            dtype: "f32".into(),
            item_ids: self.image_ids.clone(),
        };
        container::encode(NEURAL_MAGIC, &header, self.trials.data())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, payload): (NeuralHeader, _) = container::decode(NEURAL_MAGIC, bytes)?;
        if h.kind != "neural" {
            return Err(Error::Header(format!("expected a neural array, got kind {:?}", h.kind)));
        }
        if h.dtype != "f32" {
            return Err(Error::Header(format!("unsupported dtype {:?}", h.dtype)));
        }
        if h.dim != h.channels * h.time_points {
            return Err(Error::Header(format!(
                "dim {} != channels {} × time points {}",
                h.dim, h.channels, h.time_points
            )));
        }
        if h.item_ids.len() != h.count {
            return Err(Error::Header(format!(
                "count {} but {} item ids",
                h.count,
                h.item_ids.len()
            )));
        }
        let data = f32_payload(payload, h.count * h.dim)?;
        Self::new(
            h.subject_id,
            h.channel_names,
            h.sampling_rate_hz,
            Tensor::new(vec![h.count, h.channels, h.time_points], data)?,
            h.item_ids,
        )
    }
}

pub fn write_neural(ds: &NeuralDataset, path: impl AsRef<Path>) -> Result<()> {
    container::write_file(path.as_ref(), &ds.to_bytes()?)
}

pub fn read_neural(path: impl AsRef<Path>) -> Result<NeuralDataset> {
    NeuralDataset::from_bytes(&std::fs::read(path)?)
}

/// Standardizes each channel of `[n, C, T]` across all trials and time
/// points. Constant channels map to zeros.
pub fn zscore_channels(x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (n, c, t) = match x.shape() {
        &[n, c, t] => (n, c, t),
        s => return Err(Error::shape("zscore_channels", format!("expected [n, C, T], got {s:?}"))),
    };
    if n * t < 2 {
        return Err(Error::InvalidArgument(format!(
            "z-scoring needs at least 2 samples per channel, got {}",
            n * t
        )));
    }
    let count = (n * t) as f64;
    let mut out = x.clone();
    for ch in 0..c {
        let samples = || (0..n).flat_map(move |i| x.data()[(i * c + ch) * t..(i * c + ch + 1) * t].iter());
        let mean = samples().map(|&v| v as f64).sum::<f64>() / count;
        let var = samples().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / count;
        let inv = 1.0 / (var + ZSCORE_EPS).sqrt();
        for i in 0..n {
            for v in &mut out.data_mut()[(i * c + ch) * t..(i * c + ch + 1) * t] {
                *v = ((*v as f64 - mean) * inv) as f32;
            }
        }
    }
    Ok(out)
}

/// Extracts the `keep` channels of `[n, C, T]`, in `keep` order.
pub fn select_channels(x: &Tensor<f32>, names: &[String], keep: &[String]) -> Result<Tensor<f32>> {
    let (n, c, t) = match x.shape() {
        &[n, c, t] if c == names.len() => (n, c, t),
        s => {
            return Err(Error::shape(
                "select_channels",
                format!("{s:?} with {} channel names", names.len()),
            ))
        }
    };
    let index: Vec<usize> = keep
        .iter()
        .map(|k| {
            names
                .iter()
                .position(|nm| nm == k)
                .ok_or_else(|| Error::UnknownChannel(k.clone()))
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(n * index.len() * t);
    for i in 0..n {
        for &ch in &index {
            data.extend_from_slice(&x.data()[(i * c + ch) * t..(i * c + ch + 1) * t]);
        }
    }
    Tensor::new(vec![n, index.len(), t], data)
}
