use serde::{Deserialize, Serialize};

use super::{AdamW, AdamWState, AlignmentModel, TrainConfig};
use crate::data::PairedData;
use crate::error::{Error, Result};
use crate::tensor::{Rng, RngState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub tau: f64,
}

/// Complete training state: resuming from it continues the run exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub config: TrainConfig,
    pub channels: usize,
    pub time_points: usize,
    pub image_dim: usize,
    pub model: AlignmentModel<f32>,
    pub optimizer: AdamWState<f32>,
    /// Epochs completed.
    pub epoch: usize,
    pub rng: RngState,
    pub log: Vec<EpochLog>,
}

impl ModelCheckpoint {
    /// Fresh, untrained state for the given data shapes.
    pub fn initial(config: &TrainConfig, channels: usize, time_points: usize, image_dim: usize) -> Result<Self> {
        let mut rng = Rng::new(config.seed);
        let model = AlignmentModel::init(config, channels, time_points, image_dim, &mut rng)?;
        let optimizer = AdamWState::new(model.params().iter().map(|p| p.tensor.shape()));
        Ok(Self {
            config: config.clone(),
            channels,
            time_points,
            image_dim,
            model,
            optimizer,
            epoch: 0,
            rng: rng.state(),
            log: Vec::new(),
        })
    }
}

fn data_dims(pairs: &PairedData<'_>) -> Result<(usize, usize, usize)> {
    let [_, c, t] = pairs.dataset.dims()?;
    Ok((c, t, pairs.bank.dim()))
}

/// Trains from scratch for `config.epochs` epochs.
pub fn fit(
    train: &PairedData<'_>,
    test: Option<&PairedData<'_>>,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<ModelCheckpoint> {
    let (c, t, d) = data_dims(train)?;
    let start = ModelCheckpoint::initial(config, c, t, d)?;
    resume(start, train, test, on_epoch)
}

/// Continues a checkpoint until `checkpoint.config.epochs` epochs are done.
pub fn resume(
    mut ckpt: ModelCheckpoint,
    train: &PairedData<'_>,
    test: Option<&PairedData<'_>>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<ModelCheckpoint> {
    let (c, t, d) = data_dims(train)?;
    if (c, t, d) != (ckpt.channels, ckpt.time_points, ckpt.image_dim) {
        return Err(Error::shape(
            "fit",
            format!(
                "data is C={c}, T={t}, D_img={d}; checkpoint expects C={}, T={}, D_img={}",
                ckpt.channels, ckpt.time_points, ckpt.image_dim
            ),
        ));
    }
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let config = ckpt.config.clone();
    let optimizer = AdamW::new(config.learning_rate, config.weight_decay);
    let decay: Vec<bool> = ckpt.model.params().iter().map(|p| p.decay).collect();
    let mut rng = Rng::from_state(ckpt.rng);
    let test_batch = test.map(|p| p.all());

    while ckpt.epoch < config.epochs {
        let epoch = ckpt.epoch + 1;
        let mut total = 0.0f64;
        let mut batches = 0usize;
        let order: Vec<_> = train.batches(config.batch_size, Some(&mut rng))?.collect();
        for (bi, batch) in order.iter().enumerate() {
            let step = ckpt
                .model
                .loss_and_grads(&batch.neural, &batch.embeddings, Some(&mut rng))
                .map_err(|e| diverged(e, epoch, bi))?;
            if !step.loss.is_finite() {
                return Err(Error::Diverged(format!("loss is {} at epoch {epoch}, batch {bi}", step.loss)));
            }
            total += step.loss as f64;
            batches += 1;
            let grads: Vec<&Tensor<f32>> = step.grads.params().into_iter().map(|p| p.tensor).collect();
            let mut params = ckpt.model.params_mut();
            optimizer
                .step(&mut params, &grads, &decay, &mut ckpt.optimizer)
                .map_err(|e| diverged(e, epoch, bi))?;
            ckpt.model.clamp_temperature();
        }
        let test_loss = match &test_batch {
            Some(b) if !b.image_ids.is_empty() => Some(
                ckpt.model
                    .eval_loss(&b.neural, &b.embeddings)
                    .map_err(|e| diverged(e, epoch, usize::MAX))? as f64,
            ),
            _ => None,
        };
        let entry = EpochLog {
            epoch,
            train_loss: total / batches as f64,
            test_loss,
            tau: ckpt.model.temperature().tau(),
        };
        on_epoch(&entry);
        ckpt.log.push(entry);
        ckpt.epoch = epoch;
        ckpt.rng = rng.state();
    }
    Ok(ckpt)
}

fn diverged(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::NonFinite(op) => {
            let at = if batch == usize::MAX {
                "test evaluation".to_string()
            } else {
                format!("batch {batch}")
            };
            Error::Diverged(format!("non-finite value in {op} at epoch {epoch}, {at}"))
        }
        other => other,
    }
}
