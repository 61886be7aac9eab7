//! Linear projectors, the symmetric contrastive objective, AdamW and the
//! training loop.

mod adamw;
mod checkpoint;
mod config;
mod loss;
mod model;
mod projector;
mod train;

pub use adamw::{AdamW, AdamWState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::CHECKPOINT_MAGIC;
pub use config::TrainConfig;
pub use loss::{contrastive_loss, LossOutput, Temperature};
pub use model::{AlignmentModel, StepOutput};
pub use projector::{Projector, ProjectorMode};
pub use train::{fit, resume, EpochLog, ModelCheckpoint};
