use serde::{Deserialize, Serialize};

use crate::encoders::{glorot, Param};
use crate::error::{Error, Result};
use crate::tensor::{linear, linear_backward, Rng, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectorMode {
    /// Learnable affine maps into the shared space.
    Linear,
    /// No projection; both sides must already share a width.
    Identity,
}

impl std::str::FromStr for ProjectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "identity" => Ok(Self::Identity),
            other => Err(Error::InvalidArgument(format!("unknown projector mode {other:?}"))),
        }
    }
}

/// `v = z_N·W_N + b_N`, `w = z_I·W_I + b_I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector<F> {
    pub mode: ProjectorMode,
    pub w_neural: Tensor<F>,
    pub b_neural: Tensor<F>,
    pub w_image: Tensor<F>,
    pub b_image: Tensor<F>,
}

impl<F: Scalar> Projector<F> {
    pub fn init(
        mode: ProjectorMode,
        neural_dim: usize,
        image_dim: usize,
        shared_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        match mode {
            ProjectorMode::Linear => Ok(Self {
                mode,
                w_neural: glorot(&[neural_dim, shared_dim], neural_dim, shared_dim, rng),
                b_neural: Tensor::zeros(&[shared_dim]),
                w_image: glorot(&[image_dim, shared_dim], image_dim, shared_dim, rng),
                b_image: Tensor::zeros(&[shared_dim]),
            }),
            ProjectorMode::Identity => {
                if neural_dim != image_dim || image_dim != shared_dim {
                    return Err(Error::InvalidArgument(format!(
                        "identity projector needs equal widths, got neural {neural_dim}, \
                         image {image_dim}, shared {shared_dim}"
                    )));
                }
                Ok(Self {
                    mode,
                    w_neural: Tensor::zeros(&[0, 0]),
                    b_neural: Tensor::zeros(&[0]),
                    w_image: Tensor::zeros(&[0, 0]),
                    b_image: Tensor::zeros(&[0]),
                })
            }
        }
    }

    pub fn project_neural(&self, z_neural: &Tensor<F>) -> Result<Tensor<F>> {
        match self.mode {
            ProjectorMode::Linear => linear(z_neural, &self.w_neural, &self.b_neural),
            ProjectorMode::Identity => Ok(z_neural.clone()),
        }
    }

    pub fn project_image(&self, z_image: &Tensor<F>) -> Result<Tensor<F>> {
        match self.mode {
            ProjectorMode::Linear => linear(z_image, &self.w_image, &self.b_image),
            ProjectorMode::Identity => Ok(z_image.clone()),
        }
    }

    pub fn project(&self, z_neural: &Tensor<F>, z_image: &Tensor<F>) -> Result<(Tensor<F>, Tensor<F>)> {
        let (m, _) = z_neural.dims2("project")?;
        let (m2, _) = z_image.dims2("project")?;
        if m != m2 {
            return Err(Error::shape("project", format!("{m} neural rows vs {m2} image rows")));
        }
        Ok((self.project_neural(z_neural)?, self.project_image(z_image)?))
    }

    /// Parameter gradients and the gradient w.r.t. `z_neural`.
    pub fn backward(
        &self,
        z_neural: &Tensor<F>,
        z_image: &Tensor<F>,
        grad_v: &Tensor<F>,
        grad_w: &Tensor<F>,
    ) -> Result<(Self, Tensor<F>)> {
        match self.mode {
            ProjectorMode::Identity => Ok((self.clone(), grad_v.clone())),
            ProjectorMode::Linear => {
                let (dz, w_neural, b_neural) = linear_backward(z_neural, &self.w_neural, grad_v)?;
                let (_, w_image, b_image) = linear_backward(z_image, &self.w_image, grad_w)?;
                Ok((
                    Self {
                        mode: self.mode,
                        w_neural,
                        b_neural,
                        w_image,
                        b_image,
                    },
                    dz,
                ))
            }
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            mode: self.mode,
            w_neural: Tensor::zeros(self.w_neural.shape()),
            b_neural: Tensor::zeros(self.b_neural.shape()),
            w_image: Tensor::zeros(self.w_image.shape()),
            b_image: Tensor::zeros(self.b_image.shape()),
        }
    }

    pub(crate) fn params<'a>(&'a self, out: &mut Vec<Param<'a, F>>) {
        if self.mode == ProjectorMode::Linear {
            out.push(Param::weight("projector.w_neural".into(), &self.w_neural));
            out.push(Param::other("projector.b_neural".into(), &self.b_neural));
            out.push(Param::weight("projector.w_image".into(), &self.w_image));
            out.push(Param::other("projector.b_image".into(), &self.b_image));
        }
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<F>>) {
        if self.mode == ProjectorMode::Linear {
            out.extend([
                &mut self.w_neural,
                &mut self.b_neural,
                &mut self.w_image,
                &mut self.b_image,
            ]);
        }
    }

    pub fn cast<G: Scalar>(&self) -> Projector<G> {
        Projector {
            mode: self.mode,
            w_neural: self.w_neural.cast(),
            b_neural: self.b_neural.cast(),
            w_image: self.w_image.cast(),
            b_image: self.b_image.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::matmul;

    #[test]
    fn identity_mode_passes_inputs_through() {
        let mut rng = Rng::new(0);
        let p = Projector::<f32>::init(ProjectorMode::Identity, 4, 4, 4, &mut rng).unwrap();
        let a = Tensor::randn(&[3, 4], 1.0, &mut rng);
        let b = Tensor::randn(&[3, 4], 1.0, &mut rng);
        let (v, w) = p.project(&a, &b).unwrap();
        assert_eq!((v, w), (a, b));
        assert!(Projector::<f32>::init(ProjectorMode::Identity, 4, 5, 4, &mut rng).is_err());
    }

    #[test]
    fn unit_weights_zero_bias_is_identity() {
        let mut rng = Rng::new(0);
        let mut p = Projector::<f64>::init(ProjectorMode::Linear, 3, 3, 3, &mut rng).unwrap();
        p.w_neural = Tensor::identity(3);
        p.w_image = Tensor::identity(3);
        let a = Tensor::randn(&[2, 3], 1.0, &mut rng);
        let b = Tensor::randn(&[2, 3], 1.0, &mut rng);
        let (v, w) = p.project(&a, &b).unwrap();
        assert_eq!((v, w), (a, b));
    }

    #[test]
    fn random_case_matches_explicit_affine_map() {
        let mut rng = Rng::new(4);
        let mut p = Projector::<f64>::init(ProjectorMode::Linear, 5, 7, 3, &mut rng).unwrap();
        p.b_neural = Tensor::randn(&[3], 1.0, &mut rng);
        p.b_image = Tensor::randn(&[3], 1.0, &mut rng);
        let zn = Tensor::randn(&[4, 5], 1.0, &mut rng);
        let zi = Tensor::randn(&[4, 7], 1.0, &mut rng);
        let (v, w) = p.project(&zn, &zi).unwrap();
        let vn = matmul(&zn, &p.w_neural).unwrap();
        let wi = matmul(&zi, &p.w_image).unwrap();
        for r in 0..4 {
            for c in 0..3 {
                let ev = vn.row(r)[c] + p.b_neural.data()[c];
                let ew = wi.row(r)[c] + p.b_image.data()[c];
                assert!((v.row(r)[c] - ev).abs() < 1e-12);
                assert!((w.row(r)[c] - ew).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn row_count_mismatch() {
        let mut rng = Rng::new(0);
        let p = Projector::<f32>::init(ProjectorMode::Linear, 2, 2, 2, &mut rng).unwrap();
        assert!(p.project(&Tensor::zeros(&[2, 2]), &Tensor::zeros(&[3, 2])).is_err());
    }
}
