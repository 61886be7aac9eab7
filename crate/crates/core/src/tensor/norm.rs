use super::{Scalar, Tensor};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Intermediates kept by [`layer_norm`] for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache<F> {
    pub normalized: Tensor<F>,
    pub inv_std: Vec<F>,
}

#[derive(Clone, Debug)]
pub struct LayerNormGrads<F> {
    pub input: Tensor<F>,
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
}

/// Per-row standardization with population variance, then `gamma·x̂ + beta`.
pub fn layer_norm<F: Scalar>(
    x: &Tensor<F>,
    gamma: &Tensor<F>,
    beta: &Tensor<F>,
    eps: f64,
) -> Result<(Tensor<F>, LayerNormCache<F>)> {
    let (rows, d) = x.dims2("layer_norm")?;
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "layer_norm needs at least 2 features, got {d}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("layer_norm eps {eps} must be > 0")));
    }
    if gamma.len() != d || beta.len() != d {
        return Err(Error::shape(
            "layer_norm",
            format!("width {d}, gamma {}, beta {}", gamma.len(), beta.len()),
        ));
    }
    let n = F::from_usize(d).unwrap();
    let eps = F::from_f64c(eps);
    let mut normalized = x.clone();
    let mut out = x.clone();
    let mut inv_std = Vec::with_capacity(rows);
    for i in 0..rows {
        let row = x.row(i);
        let mean = row.iter().fold(F::zero(), |a, &v| a + v) / n;
        let var = row
            .iter()
            .fold(F::zero(), |a, &v| a + (v - mean) * (v - mean))
            / n;
        let is = F::one() / (var + eps).sqrt();
        inv_std.push(is);
        let xh = normalized.row_mut(i);
        for (h, &v) in xh.iter_mut().zip(row) {
            *h = (v - mean) * is;
        }
        let o = out.row_mut(i);
        for j in 0..d {
            o[j] = gamma.data()[j] * normalized.row(i)[j] + beta.data()[j];
        }
    }
    out.ensure_finite("layer_norm")?;
    Ok((out, LayerNormCache { normalized, inv_std }))
}

pub fn layer_norm_backward<F: Scalar>(
    cache: &LayerNormCache<F>,
    gamma: &Tensor<F>,
    grad: &Tensor<F>,
) -> Result<LayerNormGrads<F>> {
    let (rows, d) = cache.normalized.dims2("layer_norm_backward")?;
    if grad.shape() != cache.normalized.shape() {
        return Err(Error::shape(
            "layer_norm_backward",
            format!("{:?} vs {:?}", grad.shape(), cache.normalized.shape()),
        ));
    }
    let n = F::from_usize(d).unwrap();
    let mut d_gamma = Tensor::zeros(&[d]);
    let mut d_beta = Tensor::zeros(&[d]);
    let mut d_input = Tensor::zeros(&[rows, d]);
    let mut dxh = vec![F::zero(); d];
    for i in 0..rows {
        let g = grad.row(i);
        let xh = cache.normalized.row(i);
        for j in 0..d {
            d_gamma.data_mut()[j] = d_gamma.data()[j] + g[j] * xh[j];
            d_beta.data_mut()[j] = d_beta.data()[j] + g[j];
            dxh[j] = g[j] * gamma.data()[j];
        }
        let mean_dxh = dxh.iter().fold(F::zero(), |a, &v| a + v) / n;
        let mean_dxh_xh = dxh
            .iter()
            .zip(xh)
            .fold(F::zero(), |a, (&u, &h)| a + u * h)
            / n;
        let out = d_input.row_mut(i);
        for j in 0..d {
            out[j] = cache.inv_std[i] * (dxh[j] - mean_dxh - xh[j] * mean_dxh_xh);
        }
    }
    Ok(LayerNormGrads {
        input: d_input,
        gamma: d_gamma,
        beta: d_beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_row_maps_to_beta() {
        let x = Tensor::<f64>::full(&[2, 4], 7.5);
        let (y, _) = layer_norm(&x, &Tensor::ones(&[4]), &Tensor::zeros(&[4]), LAYER_NORM_EPS)
            .unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_two_three() {
        let x = Tensor::<f64>::from_rows(&[&[1.0, 2.0, 3.0]]);
        let (y, _) = layer_norm(&x, &Tensor::ones(&[3]), &Tensor::zeros(&[3]), 1e-12).unwrap();
        let expected = [-1.224_744_871, 0.0, 1.224_744_871];
        for (a, b) in y.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_single_feature() {
        let x = Tensor::<f64>::zeros(&[3, 1]);
        assert!(layer_norm(&x, &Tensor::ones(&[1]), &Tensor::zeros(&[1]), 1e-5).is_err());
    }
}
