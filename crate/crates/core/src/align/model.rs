use super::{contrastive_loss, Projector, Temperature, TrainConfig};
use crate::encoders::{Encoder, EncoderDims, Param};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Scalar, Tensor};

/// Encoder, both projectors and the log-temperature: everything the
/// optimizer touches.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentModel<F = f32> {
    pub encoder: Encoder<F>,
    pub projector: Projector<F>,
    /// `[log(1/τ)]`.
    pub log_scale: Tensor<F>,
    pub max_log_scale: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutput<F> {
    pub loss: F,
    pub grads: AlignmentModel<F>,
    pub grad_input: Tensor<F>,
}

impl<F: Scalar> AlignmentModel<F> {
    pub fn init(
        config: &TrainConfig,
        channels: usize,
        time_points: usize,
        image_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        let dims = EncoderDims {
            channels,
            time_points,
            embed_dim: config.embed_dim,
            dropout_p: config.dropout_p,
            tsconv: config.tsconv,
        };
        let encoder = Encoder::init(config.arch, &dims, rng)?;
        let projector = Projector::init(
            config.projector,
            config.embed_dim,
            image_dim,
            config.shared_dim,
            rng,
        )?;
        let t = Temperature::from_tau(config.initial_tau, config.min_tau)?;
        Ok(Self {
            encoder,
            projector,
            log_scale: Tensor::full(&[1], F::from_f64c(t.log_scale)),
            max_log_scale: t.max_log_scale,
        })
    }

    pub fn temperature(&self) -> Temperature {
        Temperature {
            log_scale: self.log_scale.data()[0].to_f64c(),
            max_log_scale: self.max_log_scale,
        }
    }

    /// Projected neural embeddings `v` in evaluation mode.
    pub fn embed_neural(&self, neural: &Tensor<F>) -> Result<Tensor<F>> {
        let (z, _) = self.encoder.forward(neural, None)?;
        self.projector.project_neural(&z)
    }

    /// Projected visual embeddings `w`.
    pub fn embed_images(&self, images: &Tensor<F>) -> Result<Tensor<F>> {
        self.projector.project_image(images)
    }

    /// Loss in evaluation mode (dropout off), no gradients.
    pub fn eval_loss(&self, neural: &Tensor<F>, images: &Tensor<F>) -> Result<F> {
        let v = self.embed_neural(neural)?;
        let w = self.embed_images(images)?;
        Ok(contrastive_loss(&v, &w, &self.temperature())?.loss)
    }

    /// Forward and full backward through encoder → projector → loss.
    /// `rng = Some` enables dropout.
    pub fn loss_and_grads(
        &self,
        neural: &Tensor<F>,
        images: &Tensor<F>,
        rng: Option<&mut Rng>,
    ) -> Result<StepOutput<F>> {
        let (z, cache) = self.encoder.forward(neural, rng)?;
        let (v, w) = self.projector.project(&z, images)?;
        let out = contrastive_loss(&v, &w, &self.temperature())?;
        let (projector, dz) = self.projector.backward(&z, images, &out.grad_v, &out.grad_w)?;
        let (encoder, grad_input) = self.encoder.backward(&cache, &dz)?;
        Ok(StepOutput {
            loss: out.loss,
            grads: Self {
                encoder,
                projector,
                log_scale: Tensor::full(&[1], out.grad_log_scale),
                max_log_scale: self.max_log_scale,
            },
            grad_input,
        })
    }

    /// All trainables in a fixed order (encoder, projector, temperature).
    pub fn params(&self) -> Vec<Param<'_, F>> {
        let mut out = self.encoder.params();
        self.projector.params(&mut out);
        out.push(Param {
            name: "log_scale".into(),
            decay: false,
            tensor: &self.log_scale,
        });
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut out = self.encoder.params_mut();
        self.projector.params_mut(&mut out);
        out.push(&mut self.log_scale);
        out
    }

    /// Applies the `τ` floor to the stored parameter.
    pub fn clamp_temperature(&mut self) {
        let cap = F::from_f64c(self.max_log_scale);
        let v = &mut self.log_scale.data_mut()[0];
        if *v > cap {
            *v = cap;
        }
    }

    pub fn cast<G: Scalar>(&self) -> AlignmentModel<G> {
        AlignmentModel {
            encoder: self.encoder.cast(),
            projector: self.projector.cast(),
            log_scale: self.log_scale.cast(),
            max_log_scale: self.max_log_scale,
        }
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        let a = self.params();
        let b = other.params();
        if a.len() != b.len()
            || a.iter()
                .zip(&b)
                .any(|(x, y)| x.name != y.name || x.tensor.shape() != y.tensor.shape())
        {
            return Err(Error::shape("AlignmentModel", "parameter layouts differ"));
        }
        Ok(())
    }
}
