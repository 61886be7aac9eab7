//! Symmetric (bidirectional) InfoNCE over a batch of neural/visual pairs.
//!
//! With `A[i][j] = s·cos(v_i, w_j)` and `s = 1/τ`,
//!
//! ```text
//! L = 1/(2M) · Σ_k [ (LSE_j A[j][k] − A[k][k]) + (LSE_j A[k][j] − A[k][k]) ]
//! ```
//!
//! The image→neural term reads column `k` of `A`, the neural→image term
//! reads row `k`. Swapping `v` and `w` transposes `A`, which only swaps the
//! two sums, so the loss is exactly symmetric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{l2_normalize, l2_normalize_backward, matmul, matmul_nt, matmul_tn, Scalar, Tensor};

/// Learnable temperature stored as `log(1/τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Temperature {
    pub log_scale: f64,
    /// Upper bound on `log_scale`, i.e. a floor on `τ`.
    pub max_log_scale: f64,
}

impl Temperature {
    pub fn from_tau(tau: f64, min_tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !(min_tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got τ={tau}, τ_min={min_tau}"
            )));
        }
        Ok(Self {
            log_scale: (1.0 / tau).ln(),
            max_log_scale: (1.0 / min_tau).ln(),
        })
    }

    pub fn tau(&self) -> f64 {
        (-self.effective_log_scale()).exp()
    }

    pub fn effective_log_scale(&self) -> f64 {
        self.log_scale.min(self.max_log_scale)
    }
}

#[derive(Clone, Debug)]
pub struct LossOutput<F> {
    pub loss: F,
    pub grad_v: Tensor<F>,
    pub grad_w: Tensor<F>,
    /// `∂L/∂log(1/τ)`; zero while the clamp is active.
    pub grad_log_scale: F,
}

/// Row-wise `exp(a − max)` into `out` (same layout as `a`), returning the
/// per-row log-sum-exp. The column variant walks `a` row-major but reduces
/// over rows with exactly the same operation order, so
/// `col(a) == row(aᵀ)` bit for bit.
fn row_softmax_parts<F: Scalar>(a: &[F], m: usize, out: &mut [F]) -> Vec<F> {
    let mut lse = Vec::with_capacity(m);
    for (row, dst) in a.chunks_exact(m).zip(out.chunks_exact_mut(m)) {
        let max = row.iter().fold(F::neg_infinity(), |mx, &v| mx.max(v));
        let mut total = F::zero();
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            total = total + *d;
        }
        lse.push(max + total.ln());
    }
    lse
}

fn col_softmax_parts<F: Scalar>(a: &[F], m: usize, out: &mut [F]) -> Vec<F> {
    let mut max = vec![F::neg_infinity(); m];
    for row in a.chunks_exact(m) {
        for (mx, &v) in max.iter_mut().zip(row) {
            *mx = mx.max(v);
        }
    }
    let mut total = vec![F::zero(); m];
    for (row, dst) in a.chunks_exact(m).zip(out.chunks_exact_mut(m)) {
        for (((d, &v), &mx), t) in dst.iter_mut().zip(row).zip(&max).zip(total.iter_mut()) {
            *d = (v - mx).exp();
            *t = *t + *d;
        }
    }
    max.iter().zip(&total).map(|(&mx, &t)| mx + t.ln()).collect()
}

pub fn contrastive_loss<F: Scalar>(
    v: &Tensor<F>,
    w: &Tensor<F>,
    temperature: &Temperature,
) -> Result<LossOutput<F>> {
    let (m, d) = v.dims2("contrastive_loss")?;
    if w.shape() != [m, d] {
        return Err(Error::shape(
            "contrastive_loss",
            format!("v {:?} vs w {:?}", v.shape(), w.shape()),
        ));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("contrastive loss needs at least one pair".into()));
    }
    let clamped = temperature.log_scale > temperature.max_log_scale;
    let scale = F::from_f64c(temperature.effective_log_scale().exp());
    let (v_hat, v_norms) = l2_normalize(v)?;
    let (w_hat, w_norms) = l2_normalize(w)?;
    let logits = matmul_nt(&v_hat, &w_hat)?.scale(scale);
    let a = logits.data();

    let mut row_exp = vec![F::zero(); m * m];
    let mut col_exp = vec![F::zero(); m * m];
    let row_lse = row_softmax_parts(a, m, &mut row_exp);
    let col_lse = col_softmax_parts(a, m, &mut col_exp);
    let diag = |k: usize| a[k * m + k];
    let row_total = (0..m).fold(F::zero(), |acc, k| acc + (row_lse[k] - diag(k)));
    let col_total = (0..m).fold(F::zero(), |acc, k| acc + (col_lse[k] - diag(k)));
    let two_m = F::from_usize(2 * m).unwrap();
    let loss = (row_total + col_total) / two_m;
    if !loss.is_finite() {
        return Err(Error::NonFinite("contrastive_loss"));
    }

    // ∂L/∂A = ((P_row − I) + (P_col − I)) / 2M
    let inv_row: Vec<F> = row_lse
        .iter()
        .zip(a.chunks_exact(m))
        .map(|(&l, row)| {
            let max = row.iter().fold(F::neg_infinity(), |mx, &v| mx.max(v));
            (max - l).exp()
        })
        .collect();
    let mut col_max = vec![F::neg_infinity(); m];
    for row in a.chunks_exact(m) {
        for (mx, &v) in col_max.iter_mut().zip(row) {
            *mx = mx.max(v);
        }
    }
    let inv_col: Vec<F> = col_lse.iter().zip(&col_max).map(|(&l, &mx)| (mx - l).exp()).collect();
    let mut grad_logits = Tensor::zeros(&[m, m]);
    let mut grad_log_scale = F::zero();
    let two = F::from_f64c(2.0);
    for i in 0..m {
        let g_row = &mut grad_logits.data_mut()[i * m..(i + 1) * m];
        for j in 0..m {
            let idx = i * m + j;
            let mut g = row_exp[idx] * inv_row[i] + col_exp[idx] * inv_col[j];
            if i == j {
                g = g - two;
            }
            let g = g / two_m;
            g_row[j] = g;
            grad_log_scale = grad_log_scale + g * a[idx];
        }
    }
    if clamped {
        grad_log_scale = F::zero();
    }
    let grad_v_hat = matmul(&grad_logits, &w_hat)?.scale(scale);
    let grad_w_hat = matmul_tn(&grad_logits, &v_hat)?.scale(scale);
    Ok(LossOutput {
        loss,
        grad_v: l2_normalize_backward(&v_hat, &v_norms, &grad_v_hat)?,
        grad_w: l2_normalize_backward(&w_hat, &w_norms, &grad_w_hat)?,
        grad_log_scale,
    })
}
