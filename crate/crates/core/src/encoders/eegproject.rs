use super::{fingerprint, glorot, EncoderDims, Param, ResidualBlock, ResidualCache};
use crate::error::{Error, Result};
use crate::tensor::{linear, linear_backward, Rng, Scalar, Tensor};

/// Flatten → linear → residual GELU/dropout branch → LayerNorm.
#[derive(Clone, Debug, PartialEq)]
pub struct EegProject<F> {
    pub w0: Tensor<F>,
    pub b0: Tensor<F>,
    pub block: ResidualBlock<F>,
    pub dropout_p: f64,
}

#[derive(Clone, Debug)]
pub struct EegProjectCache<F> {
    input_shape: Vec<usize>,
    flat: Tensor<F>,
    block: ResidualCache<F>,
    params: u64,
}

impl<F: Scalar> EegProject<F> {
    pub fn init(dims: &EncoderDims, rng: &mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&dims.dropout_p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability {} outside [0, 1)",
                dims.dropout_p
            )));
        }
        let input = dims.channels * dims.time_points;
        let d = dims.embed_dim;
        if input == 0 || d < 2 {
            return Err(Error::InvalidArgument(format!(
                "EEGProject needs C·T > 0 and D ≥ 2, got C·T={input}, D={d}"
            )));
        }
        let w0 = glorot(&[input, d], input, d, rng);
        let block = ResidualBlock::init(d, rng);
        Ok(Self {
            w0,
            b0: Tensor::zeros(&[d]),
            block,
            dropout_p: dims.dropout_p,
        })
    }

    pub fn input_width(&self) -> usize {
        self.w0.shape()[0]
    }

    fn digest(&self) -> u64 {
        fingerprint([
            &self.w0,
            &self.b0,
            &self.block.w,
            &self.block.b,
            &self.block.gamma,
            &self.block.beta,
        ])
    }

    /// `x: [M, C, T]` (any shape whose trailing axes flatten to `C·T`).
    pub fn forward(&self, x: &Tensor<F>, rng: Option<&mut Rng>) -> Result<(Tensor<F>, EegProjectCache<F>)> {
        let m = x.shape().first().copied().unwrap_or(0);
        let width = self.input_width();
        if m == 0 || x.len() != m * width {
            return Err(Error::shape(
                "eegproject_forward",
                format!("input {:?} does not flatten to [M×{width}]", x.shape()),
            ));
        }
        let flat = x.clone().reshape(&[m, width])?;
        let h = linear(&flat, &self.w0, &self.b0)?;
        let (z, block) = self.block.forward(h, self.dropout_p, rng)?;
        Ok((
            z,
            EegProjectCache {
                input_shape: x.shape().to_vec(),
                flat,
                block,
                params: self.digest(),
            },
        ))
    }

    pub fn backward(&self, cache: &EegProjectCache<F>, grad: &Tensor<F>) -> Result<(Self, Tensor<F>)> {
        if cache.params != self.digest() {
            return Err(Error::StaleCache);
        }
        let (block, d_h) = self.block.backward(&cache.block, grad)?;
        let (d_flat, w0, b0) = linear_backward(&cache.flat, &self.w0, &d_h)?;
        let dx = d_flat.reshape(&cache.input_shape)?;
        Ok((
            Self {
                w0,
                b0,
                block,
                dropout_p: self.dropout_p,
            },
            dx,
        ))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w0: Tensor::zeros(self.w0.shape()),
            b0: Tensor::zeros(self.b0.shape()),
            block: self.block.zeros_like(),
            dropout_p: self.dropout_p,
        }
    }

    pub(crate) fn params<'a>(&'a self, out: &mut Vec<Param<'a, F>>) {
        out.push(Param::weight("encoder.w0".into(), &self.w0));
        out.push(Param::other("encoder.b0".into(), &self.b0));
        self.block.params("encoder.block", out);
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<F>>) {
        out.extend([&mut self.w0, &mut self.b0]);
        self.block.params_mut(out);
    }

    pub(crate) fn cast<G: Scalar>(&self) -> EegProject<G> {
        EegProject {
            w0: self.w0.cast(),
            b0: self.b0.cast(),
            block: self.block.cast(),
            dropout_p: self.dropout_p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{layer_norm, LAYER_NORM_EPS};

    fn dims() -> EncoderDims {
        EncoderDims {
            channels: 3,
            time_points: 5,
            embed_dim: 6,
            dropout_p: 0.3,
            tsconv: Default::default(),
        }
    }

    #[test]
    fn zero_residual_branch_reduces_to_layer_norm_of_projection() {
        let mut rng = Rng::new(2);
        let mut enc = EegProject::<f64>::init(&dims(), &mut rng).unwrap();
        enc.block.w = Tensor::zeros(&[6, 6]);
        let x = Tensor::randn(&[4, 3, 5], 1.0, &mut rng);
        let (z, _) = enc.forward(&x, None).unwrap();
        let h = linear(&x.clone().reshape(&[4, 15]).unwrap(), &enc.w0, &enc.b0).unwrap();
        // GELU(0) = 0, so the branch vanishes.
        let (expected, _) = layer_norm(&h, &enc.block.gamma, &enc.block.beta, LAYER_NORM_EPS).unwrap();
        assert_eq!(z, expected);
    }

    #[test]
    fn eval_mode_is_deterministic_and_p0_train_matches_eval() {
        let mut rng = Rng::new(8);
        let mut enc = EegProject::<f32>::init(&dims(), &mut rng).unwrap();
        let x = Tensor::randn(&[4, 3, 5], 1.0, &mut rng);
        let (a, _) = enc.forward(&x, None).unwrap();
        let (b, _) = enc.forward(&x, None).unwrap();
        assert_eq!(a, b);
        enc.dropout_p = 0.0;
        let (c, _) = enc.forward(&x, Some(&mut rng)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn zero_upstream_gradient_and_linearity() {
        let mut rng = Rng::new(5);
        let enc = EegProject::<f64>::init(&dims(), &mut rng).unwrap();
        let x = Tensor::randn(&[4, 3, 5], 1.0, &mut rng);
        let (_, cache) = enc.forward(&x, Some(&mut Rng::new(1))).unwrap();
        let (g, dx) = enc.backward(&cache, &Tensor::zeros(&[4, 6])).unwrap();
        assert_eq!(g.w0.max_abs(), 0.0);
        assert_eq!(g.block.gamma.max_abs(), 0.0);
        assert_eq!(dx.max_abs(), 0.0);

        let up = Tensor::randn(&[4, 6], 1.0, &mut rng);
        let (g1, dx1) = enc.backward(&cache, &up).unwrap();
        let (g2, dx2) = enc.backward(&cache, &up.scale(2.0)).unwrap();
        for (a, b) in g1.w0.data().iter().zip(g2.w0.data()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        for (a, b) in dx1.data().iter().zip(dx2.data()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let mut rng = Rng::new(5);
        let mut enc = EegProject::<f64>::init(&dims(), &mut rng).unwrap();
        let x = Tensor::randn(&[2, 3, 5], 1.0, &mut rng);
        let (_, cache) = enc.forward(&x, None).unwrap();
        enc.w0.data_mut()[0] += 1.0;
        assert!(matches!(
            enc.backward(&cache, &Tensor::ones(&[2, 6])),
            Err(Error::StaleCache)
        ));
    }

    #[test]
    fn wrong_input_width_rejected() {
        let mut rng = Rng::new(5);
        let enc = EegProject::<f32>::init(&dims(), &mut rng).unwrap();
        assert!(enc.forward(&Tensor::zeros(&[2, 3, 4]), None).is_err());
    }
}
