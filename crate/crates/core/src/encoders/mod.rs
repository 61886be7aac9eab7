//! Neural-signal encoders with hand-written backward passes.

mod block;
mod eegproject;
mod tsconv;

pub use block::{ResidualBlock, ResidualCache};
pub use eegproject::{EegProject, EegProjectCache};
pub use tsconv::{TsConv, TsConvCache, TsConvGeometry};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Rng, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    EegProject,
    TsConv,
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eegproject" => Ok(Arch::EegProject),
            "tsconv" => Ok(Arch::TsConv),
            other => Err(Error::InvalidArgument(format!("unknown encoder {other:?}"))),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::EegProject => "eegproject",
            Arch::TsConv => "tsconv",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub channels: usize,
    pub time_points: usize,
    /// Output width `D` of the encoder.
    pub embed_dim: usize,
    pub dropout_p: f64,
    #[serde(default)]
    pub tsconv: TsConvGeometry,
}

/// A trainable tensor together with its name and whether weight decay
/// applies to it.
pub struct Param<'a, F> {
    pub name: String,
    pub decay: bool,
    pub tensor: &'a Tensor<F>,
}

impl<'a, F> Param<'a, F> {
    pub(crate) fn weight(name: String, tensor: &'a Tensor<F>) -> Self {
        Self { name, decay: true, tensor }
    }

    pub(crate) fn other(name: String, tensor: &'a Tensor<F>) -> Self {
        Self { name, decay: false, tensor }
    }
}

/// Glorot-normal draw: `N(0, 2/(fan_in + fan_out))`.
pub fn glorot<F: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor<F> {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::randn(shape, std, rng)
}

/// Cheap order-sensitive digest of parameter values, used to reject
/// backward calls against a cache produced by different parameters.
pub(crate) fn fingerprint<'a, F: Scalar>(tensors: impl IntoIterator<Item = &'a Tensor<F>>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for t in tensors {
        for &v in t.data() {
            h ^= v.to_f64c().to_bits();
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
pub enum Encoder<F = f32> {
    EegProject(EegProject<F>),
    TsConv(TsConv<F>),
}

#[derive(Clone, Debug)]
pub enum EncoderCache<F> {
    EegProject(EegProjectCache<F>),
    TsConv(TsConvCache<F>),
}

impl<F: Scalar> Encoder<F> {
    pub fn init(arch: Arch, dims: &EncoderDims, rng: &mut Rng) -> Result<Self> {
        Ok(match arch {
            Arch::EegProject => Encoder::EegProject(EegProject::init(dims, rng)?),
            Arch::TsConv => Encoder::TsConv(TsConv::init(dims, rng)?),
        })
    }

    pub fn arch(&self) -> Arch {
        match self {
            Encoder::EegProject(_) => Arch::EegProject,
            Encoder::TsConv(_) => Arch::TsConv,
        }
    }

    pub fn embed_dim(&self) -> usize {
        match self {
            Encoder::EegProject(e) => e.block.width(),
            Encoder::TsConv(e) => e.block.width(),
        }
    }

    pub fn dropout_p(&self) -> f64 {
        match self {
            Encoder::EegProject(e) => e.dropout_p,
            Encoder::TsConv(e) => e.dropout_p,
        }
    }

    /// `rng = Some` runs in training mode (dropout active).
    pub fn forward(&self, x: &Tensor<F>, rng: Option<&mut Rng>) -> Result<(Tensor<F>, EncoderCache<F>)> {
        match self {
            Encoder::EegProject(e) => {
                let (z, c) = e.forward(x, rng)?;
                Ok((z, EncoderCache::EegProject(c)))
            }
            Encoder::TsConv(e) => {
                let (z, c) = e.forward(x, rng)?;
                Ok((z, EncoderCache::TsConv(c)))
            }
        }
    }

    /// Gradients shaped like the encoder itself, plus the input gradient.
    pub fn backward(&self, cache: &EncoderCache<F>, grad: &Tensor<F>) -> Result<(Self, Tensor<F>)> {
        match (self, cache) {
            (Encoder::EegProject(e), EncoderCache::EegProject(c)) => {
                let (g, dx) = e.backward(c, grad)?;
                Ok((Encoder::EegProject(g), dx))
            }
            (Encoder::TsConv(e), EncoderCache::TsConv(c)) => {
                let (g, dx) = e.backward(c, grad)?;
                Ok((Encoder::TsConv(g), dx))
            }
            _ => Err(Error::StaleCache),
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Encoder::EegProject(e) => Encoder::EegProject(e.zeros_like()),
            Encoder::TsConv(e) => Encoder::TsConv(e.zeros_like()),
        }
    }

    pub fn params(&self) -> Vec<Param<'_, F>> {
        let mut out = Vec::new();
        match self {
            Encoder::EegProject(e) => e.params(&mut out),
            Encoder::TsConv(e) => e.params(&mut out),
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut out = Vec::new();
        match self {
            Encoder::EegProject(e) => e.params_mut(&mut out),
            Encoder::TsConv(e) => e.params_mut(&mut out),
        }
        out
    }

    pub fn cast<G: Scalar>(&self) -> Encoder<G> {
        match self {
            Encoder::EegProject(e) => Encoder::EegProject(e.cast()),
            Encoder::TsConv(e) => Encoder::TsConv(e.cast()),
        }
    }
}

impl<F: Scalar> ResidualBlock<F> {
    pub(crate) fn cast<G: Scalar>(&self) -> ResidualBlock<G> {
        ResidualBlock {
            w: self.w.cast(),
            b: self.b.cast(),
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
        }
    }
}
