use crate::error::Result;
use crate::tensor::{
    dropout_backward, dropout_forward, gelu, gelu_backward, layer_norm, layer_norm_backward,
    linear, linear_backward, LayerNormCache, Rng, Scalar, Tensor, LAYER_NORM_EPS,
};

/// `z = LayerNorm(h + Dropout(GELU(h·W + b)))`: the residual stage shared
/// by both encoders. Hidden width equals output width.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock<F> {
    pub w: Tensor<F>,
    pub b: Tensor<F>,
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
}

#[derive(Clone, Debug)]
pub struct ResidualCache<F> {
    h: Tensor<F>,
    pre_activation: Tensor<F>,
    mask: Option<Tensor<F>>,
    norm: LayerNormCache<F>,
}

impl<F: Scalar> ResidualBlock<F> {
    pub fn init(width: usize, rng: &mut Rng) -> Self {
        Self {
            w: super::glorot(&[width, width], width, width, rng),
            b: Tensor::zeros(&[width]),
            gamma: Tensor::ones(&[width]),
            beta: Tensor::zeros(&[width]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Tensor::zeros(self.w.shape()),
            b: Tensor::zeros(self.b.shape()),
            gamma: Tensor::zeros(self.gamma.shape()),
            beta: Tensor::zeros(self.beta.shape()),
        }
    }

    pub fn width(&self) -> usize {
        self.b.len()
    }

    pub fn forward(
        &self,
        h: Tensor<F>,
        dropout_p: f64,
        rng: Option<&mut Rng>,
    ) -> Result<(Tensor<F>, ResidualCache<F>)> {
        let pre_activation = linear(&h, &self.w, &self.b)?;
        let activated = gelu(&pre_activation);
        let (branch, mask) = dropout_forward(&activated, dropout_p, rng)?;
        let sum = h.add(&branch)?;
        let (z, norm) = layer_norm(&sum, &self.gamma, &self.beta, LAYER_NORM_EPS)?;
        Ok((
            z,
            ResidualCache {
                h,
                pre_activation,
                mask,
                norm,
            },
        ))
    }

    /// Returns parameter gradients and the gradient w.r.t. the block input.
    pub fn backward(&self, cache: &ResidualCache<F>, grad: &Tensor<F>) -> Result<(Self, Tensor<F>)> {
        let ln = layer_norm_backward(&cache.norm, &self.gamma, grad)?;
        let d_branch = dropout_backward(cache.mask.as_ref(), &ln.input)?;
        let d_pre = gelu_backward(&cache.pre_activation, &d_branch)?;
        let (d_h_branch, d_w, d_b) = linear_backward(&cache.h, &self.w, &d_pre)?;
        let d_h = ln.input.add(&d_h_branch)?;
        Ok((
            Self {
                w: d_w,
                b: d_b,
                gamma: ln.gamma,
                beta: ln.beta,
            },
            d_h,
        ))
    }

    pub(crate) fn params<'a>(&'a self, prefix: &str, out: &mut Vec<super::Param<'a, F>>) {
        out.push(super::Param::weight(format!("{prefix}.w"), &self.w));
        out.push(super::Param::other(format!("{prefix}.b"), &self.b));
        out.push(super::Param::other(format!("{prefix}.gamma"), &self.gamma));
        out.push(super::Param::other(format!("{prefix}.beta"), &self.beta));
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<F>>) {
        out.extend([&mut self.w, &mut self.b, &mut self.gamma, &mut self.beta]);
    }
}
