use serde::{Deserialize, Serialize};

use super::{fingerprint, glorot, EncoderDims, Param, ResidualBlock, ResidualCache};
use crate::error::{Error, Result};
use crate::tensor::{
    avgpool2d, avgpool2d_backward, conv2d, conv2d_backward, linear, linear_backward, pooled_len,
    Rng, Scalar, Tensor,
};

/// Kernel geometry of the convolutional front-end. The default is the
/// ShallowNet-style stack: 40 filters, temporal kernel 25,
/// average pool 51 with stride 5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TsConvGeometry {
    pub filters: usize,
    pub temporal_kernel: usize,
    pub pool_window: usize,
    pub pool_stride: usize,
}

impl Default for TsConvGeometry {
    fn default() -> Self {
        Self {
            filters: 40,
            temporal_kernel: 25,
            pool_window: 51,
            pool_stride: 5,
        }
    }
}

impl TsConvGeometry {
    /// Pooled time length `P` for input length `T`.
    pub fn pooled_time(&self, time_points: usize) -> Result<usize> {
        if self.temporal_kernel == 0 || self.temporal_kernel > time_points {
            return Err(Error::InvalidArgument(format!(
                "time series of length {time_points} too short for temporal kernel {}",
                self.temporal_kernel
            )));
        }
        let conv_len = time_points - self.temporal_kernel + 1;
        pooled_len(conv_len, self.pool_window, self.pool_stride).map_err(|_| {
            Error::InvalidArgument(format!(
                "time series of length {time_points} too short: need at least {}",
                self.temporal_kernel + self.pool_window - 1
            ))
        })
    }

    /// Flattened front-end width `F = filters · P`.
    pub fn flat_width(&self, time_points: usize) -> Result<usize> {
        Ok(self.filters * self.pooled_time(time_points)?)
    }
}

/// Temporal conv → average pool → spatial conv → flatten → linear →
/// residual block. No nonlinearity between the convolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct TsConv<F> {
    pub geometry: TsConvGeometry,
    pub k_temporal: Tensor<F>,
    pub b_temporal: Tensor<F>,
    pub k_spatial: Tensor<F>,
    pub b_spatial: Tensor<F>,
    pub w_proj: Tensor<F>,
    pub b_proj: Tensor<F>,
    pub block: ResidualBlock<F>,
    pub dropout_p: f64,
}

#[derive(Clone, Debug)]
pub struct TsConvCache<F> {
    input_shape: Vec<usize>,
    x4: Tensor<F>,
    temporal_shape: Vec<usize>,
    pooled: Tensor<F>,
    flat: Tensor<F>,
    block: ResidualCache<F>,
    params: u64,
}

impl<F: Scalar> TsConv<F> {
    pub fn init(dims: &EncoderDims, rng: &mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&dims.dropout_p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability {} outside [0, 1)",
                dims.dropout_p
            )));
        }
        let g = dims.tsconv;
        let (f, c, tk, d) = (g.filters, dims.channels, g.temporal_kernel, dims.embed_dim);
        if f == 0 || c == 0 || d < 2 {
            return Err(Error::InvalidArgument("TSConv needs filters, channels > 0 and D ≥ 2".into()));
        }
        let flat = g.flat_width(dims.time_points)?;
        Ok(Self {
            geometry: g,
            k_temporal: glorot(&[f, 1, 1, tk], tk, f * tk, rng),
            b_temporal: Tensor::zeros(&[f]),
            k_spatial: glorot(&[f, f, c, 1], f * c, f * c, rng),
            b_spatial: Tensor::zeros(&[f]),
            w_proj: glorot(&[flat, d], flat, d, rng),
            b_proj: Tensor::zeros(&[d]),
            block: ResidualBlock::init(d, rng),
            dropout_p: dims.dropout_p,
        })
    }

    pub fn channels(&self) -> usize {
        self.k_spatial.shape()[2]
    }

    fn digest(&self) -> u64 {
        fingerprint([
            &self.k_temporal,
            &self.b_temporal,
            &self.k_spatial,
            &self.b_spatial,
            &self.w_proj,
            &self.b_proj,
            &self.block.w,
            &self.block.b,
            &self.block.gamma,
            &self.block.beta,
        ])
    }

    /// `x: [M, C, T]` or `[M, 1, C, T]`.
    pub fn forward(&self, x: &Tensor<F>, rng: Option<&mut Rng>) -> Result<(Tensor<F>, TsConvCache<F>)> {
        let (m, c, t) = match x.shape() {
            &[m, c, t] | &[m, 1, c, t] => (m, c, t),
            s => return Err(Error::shape("tsconv_forward", format!("expected [M, C, T], got {s:?}"))),
        };
        if c != self.channels() {
            return Err(Error::shape(
                "tsconv_forward",
                format!("{c} channels, encoder built for {}", self.channels()),
            ));
        }
        let g = self.geometry;
        let flat_width = g.flat_width(t)?;
        if flat_width != self.w_proj.shape()[0] {
            return Err(Error::shape(
                "tsconv_forward",
                format!("T={t} gives F={flat_width}, encoder built for {}", self.w_proj.shape()[0]),
            ));
        }
        let x4 = x.clone().reshape(&[m, 1, c, t])?;
        let temporal = conv2d(&x4, &self.k_temporal, &self.b_temporal)?;
        let pooled = avgpool2d(&temporal, (1, g.pool_window), (1, g.pool_stride))?;
        let spatial = conv2d(&pooled, &self.k_spatial, &self.b_spatial)?;
        let flat = spatial.reshape(&[m, flat_width])?;
        let h = linear(&flat, &self.w_proj, &self.b_proj)?;
        let (z, block) = self.block.forward(h, self.dropout_p, rng)?;
        Ok((
            z,
            TsConvCache {
                input_shape: x.shape().to_vec(),
                x4,
                temporal_shape: temporal.shape().to_vec(),
                pooled,
                flat,
                block,
                params: self.digest(),
            },
        ))
    }

    pub fn backward(&self, cache: &TsConvCache<F>, grad: &Tensor<F>) -> Result<(Self, Tensor<F>)> {
        if cache.params != self.digest() {
            return Err(Error::StaleCache);
        }
        let g = self.geometry;
        let (block, d_h) = self.block.backward(&cache.block, grad)?;
        let (d_flat, w_proj, b_proj) = linear_backward(&cache.flat, &self.w_proj, &d_h)?;
        let [m, f, _, p] = cache.pooled.dims4("tsconv_backward")?;
        let d_spatial = d_flat.reshape(&[m, f, 1, p])?;
        let spatial = conv2d_backward(&cache.pooled, &self.k_spatial, &d_spatial)?;
        let d_temporal = avgpool2d_backward(
            &cache.temporal_shape,
            (1, g.pool_window),
            (1, g.pool_stride),
            &spatial.input,
        )?;
        let temporal = conv2d_backward(&cache.x4, &self.k_temporal, &d_temporal)?;
        let dx = temporal.input.reshape(&cache.input_shape)?;
        Ok((
            Self {
                geometry: g,
                k_temporal: temporal.kernel,
                b_temporal: temporal.bias,
                k_spatial: spatial.kernel,
                b_spatial: spatial.bias,
                w_proj,
                b_proj,
                block,
                dropout_p: self.dropout_p,
            },
            dx,
        ))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            geometry: self.geometry,
            k_temporal: Tensor::zeros(self.k_temporal.shape()),
            b_temporal: Tensor::zeros(self.b_temporal.shape()),
            k_spatial: Tensor::zeros(self.k_spatial.shape()),
            b_spatial: Tensor::zeros(self.b_spatial.shape()),
            w_proj: Tensor::zeros(self.w_proj.shape()),
            b_proj: Tensor::zeros(self.b_proj.shape()),
            block: self.block.zeros_like(),
            dropout_p: self.dropout_p,
        }
    }

    pub(crate) fn params<'a>(&'a self, out: &mut Vec<Param<'a, F>>) {
        out.push(Param::weight("encoder.k_temporal".into(), &self.k_temporal));
        out.push(Param::other("encoder.b_temporal".into(), &self.b_temporal));
        out.push(Param::weight("encoder.k_spatial".into(), &self.k_spatial));
        out.push(Param::other("encoder.b_spatial".into(), &self.b_spatial));
        out.push(Param::weight("encoder.w_proj".into(), &self.w_proj));
        out.push(Param::other("encoder.b_proj".into(), &self.b_proj));
        self.block.params("encoder.block", out);
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<F>>) {
        out.extend([
            &mut self.k_temporal,
            &mut self.b_temporal,
            &mut self.k_spatial,
            &mut self.b_spatial,
            &mut self.w_proj,
            &mut self.b_proj,
        ]);
        self.block.params_mut(out);
    }

    pub(crate) fn cast<G: Scalar>(&self) -> TsConv<G> {
        TsConv {
            geometry: self.geometry,
            k_temporal: self.k_temporal.cast(),
            b_temporal: self.b_temporal.cast(),
            k_spatial: self.k_spatial.cast(),
            b_spatial: self.b_spatial.cast(),
            w_proj: self.w_proj.cast(),
            b_proj: self.b_proj.cast(),
            block: self.block.cast(),
            dropout_p: self.dropout_p,
        }
    }
}
