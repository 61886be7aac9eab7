//! Seeded inputs shared by the kernel benchmarks.

use neuroalign::align::{AlignmentModel, TrainConfig};
use neuroalign::encoders::Arch;
use neuroalign::{Rng, Tensor};

pub const SEED: u64 = 0x5eed;

pub fn randn(shape: &[usize], rng: &mut Rng) -> Tensor<f32> {
    Tensor::randn(shape, 1.0, rng)
}

/// Recording-sized batch: `[batch, channels, time]`.
pub struct Workload {
    pub neural: Tensor<f32>,
    pub images: Tensor<f32>,
    pub model: AlignmentModel<f32>,
}

pub fn workload(arch: Arch, batch: usize, channels: usize, time_points: usize, image_dim: usize, width: usize) -> Workload {
    let mut rng = Rng::new(SEED);
    let config = TrainConfig {
        arch,
        embed_dim: width,
        shared_dim: width,
        ..TrainConfig::default()
    };
    let model = AlignmentModel::init(&config, channels, time_points, image_dim, &mut rng).expect("valid dims");
    Workload {
        neural: randn(&[batch, channels, time_points], &mut rng),
        images: randn(&[batch, image_dim], &mut rng),
        model,
    }
}
