use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erf;

use super::{Rng, Scalar, Tensor};
use crate::error::{Error, Result};

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x * FRAC_1_SQRT_2))
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Exact GELU, `x·Φ(x)`.
pub fn gelu<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    x.map(|v| {
        let v = v.to_f64c();
        F::from_f64c(v * std_normal_cdf(v))
    })
}

/// `grad · (Φ(x) + x·φ(x))`, evaluated at the pre-activation `x`.
pub fn gelu_backward<F: Scalar>(x: &Tensor<F>, grad: &Tensor<F>) -> Result<Tensor<F>> {
    let local = x.map(|v| {
        let v = v.to_f64c();
        F::from_f64c(std_normal_cdf(v) + v * std_normal_pdf(v))
    });
    local.mul(grad)
}

/// Row-wise softmax of a matrix, max-shifted.
pub fn softmax_rows<F: Scalar>(x: &Tensor<F>) -> Result<Tensor<F>> {
    let (_, n) = x.dims2("softmax_rows")?;
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(n.max(1)) {
        let max = row.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
        let mut total = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total = total + *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Ok(out)
}

/// Scales each row to unit Euclidean norm. Returns the normalized matrix
/// and the per-row norms (needed by the backward pass).
pub fn l2_normalize<F: Scalar>(x: &Tensor<F>) -> Result<(Tensor<F>, Vec<F>)> {
    let (rows, cols) = x.dims2("l2_normalize")?;
    let mut out = x.clone();
    let mut norms = Vec::with_capacity(rows);
    for (i, row) in out.data_mut().chunks_mut(cols.max(1)).enumerate() {
        let norm = row.iter().fold(F::zero(), |acc, &v| acc + v * v).sqrt();
        if norm == F::zero() {
            return Err(Error::ZeroNorm { row: i });
        }
        for v in row.iter_mut() {
            *v = *v / norm;
        }
        norms.push(norm);
    }
    Ok((out, norms))
}

/// Backward of [`l2_normalize`]: `(g − x̂ (x̂·g)) / ‖x‖` per row.
pub fn l2_normalize_backward<F: Scalar>(
    normalized: &Tensor<F>,
    norms: &[F],
    grad: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (rows, cols) = normalized.dims2("l2_normalize_backward")?;
    if grad.shape() != normalized.shape() || norms.len() != rows {
        return Err(Error::shape(
            "l2_normalize_backward",
            format!("{:?} vs {:?}", grad.shape(), normalized.shape()),
        ));
    }
    let mut out = grad.clone();
    for i in 0..rows {
        let xh = normalized.row(i);
        let proj = super::dot(xh, grad.row(i));
        let row = &mut out.data_mut()[i * cols..(i + 1) * cols];
        for (o, &h) in row.iter_mut().zip(xh) {
            *o = (*o - h * proj) / norms[i];
        }
    }
    Ok(out)
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, otherwise
/// `1/(1−p)`.
pub fn dropout_mask<F: Scalar>(shape: &[usize], p: f64, rng: &mut Rng) -> Result<Tensor<F>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    let keep = F::from_f64c(1.0 / (1.0 - p));
    if p == 0.0 {
        return Ok(Tensor::full(shape, F::one()));
    }
    Ok(Tensor::from_fn(shape, |_| {
        if rng.uniform() < p {
            F::zero()
        } else {
            keep
        }
    }))
}

/// Applies dropout. `rng = None` is evaluation mode: identity, no mask.
pub fn dropout_forward<F: Scalar>(
    x: &Tensor<F>,
    p: f64,
    rng: Option<&mut Rng>,
) -> Result<(Tensor<F>, Option<Tensor<F>>)> {
    match rng {
        None => Ok((x.clone(), None)),
        Some(rng) => {
            let mask = dropout_mask(x.shape(), p, rng)?;
            Ok((x.mul(&mask)?, Some(mask)))
        }
    }
}

pub fn dropout_backward<F: Scalar>(
    mask: Option<&Tensor<F>>,
    grad: &Tensor<F>,
) -> Result<Tensor<F>> {
    match mask {
        None => Ok(grad.clone()),
        Some(m) => grad.mul(m),
    }
}
