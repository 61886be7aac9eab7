//! Dense row-major tensors and the handful of kernels the encoders,
//! projectors and contrastive loss are built from.
//!
//! Every kernel that has a backward pass exposes it as a separate free
//! function taking whatever the forward pass cached. There is no tape.
//! Reductions run in a fixed loop order; seeded runs reproduce bit-for-bit.

mod activation;
mod conv;
mod norm;
mod rng;

pub use activation::{
    dropout_backward, dropout_forward, dropout_mask, gelu, gelu_backward, l2_normalize,
    l2_normalize_backward, softmax_rows,
};
pub use conv::{avgpool2d, avgpool2d_backward, conv2d, conv2d_backward, pooled_len, Conv2dGrads};
pub use norm::{layer_norm, layer_norm_backward, LayerNormCache, LayerNormGrads, LAYER_NORM_EPS};
pub use rng::{derive_seed, Rng, RngState};

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element type of a [`Tensor`]. Training runs in `f32`; gradient checks
/// instantiate the same code with `f64`.
pub trait Scalar:
    Float + FromPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    fn from_f64c(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to every scalar")
    }

    fn to_f64c(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// `c = a · b` for an `m×k` by `k×n` product with arbitrary element
    /// strides (row stride, column stride) on each operand.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], a_strides: [isize; 2], b: &[Self], b_strides: [isize; 2], c: &mut [Self]);
}

fn check_gemm_extent(len: usize, rows: usize, cols: usize, [rs, cs]: [isize; 2]) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
        assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "gemm operand out of bounds");
    }
}

macro_rules! impl_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(m: usize, k: usize, n: usize, a: &[$t], sa: [isize; 2], b: &[$t], sb: [isize; 2], c: &mut [$t]) {
                check_gemm_extent(a.len(), m, k, sa);
                check_gemm_extent(b.len(), k, n, sb);
                assert_eq!(c.len(), m * n, "gemm output size");
                // SAFETY: every operand extent was bounds-checked above and
                // `c` is an exclusively borrowed, densely packed m×n buffer.
                unsafe {
                    $kernel(
                        m, k, n, 1.0,
                        a.as_ptr(), sa[0], sa[1],
                        b.as_ptr(), sb[0], sb[1],
                        0.0, c.as_mut_ptr(), n as isize, 1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Debug> Debug for Tensor<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        let t = Self { shape, data };
        t.ensure_finite("Tensor::new")?;
        Ok(t)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, F::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, F::one())
    }

    pub fn full(shape: &[usize], value: F) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> F) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_rows(rows: &[&[F]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            shape: vec![rows.len(), cols],
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { F::one() } else { F::zero() })
    }

    pub fn randn(shape: &[usize], std: f64, rng: &mut Rng) -> Self {
        Self::from_fn(shape, |_| F::from_f64c(rng.normal() * std))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(op, format!("expected a matrix, got {:?}", self.shape))),
        }
    }

    pub fn dims4(&self, op: &'static str) -> Result<[usize; 4]> {
        match self.shape[..] {
            [a, b, c, d] => Ok([a, b, c, d]),
            _ => Err(Error::shape(op, format!("expected rank 4, got {:?}", self.shape))),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn row(&self, i: usize) -> &[F] {
        let c = self.data.len() / self.shape[0];
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        let c = self.data.len() / self.shape[0];
        &mut self.data[i * c..(i + 1) * c]
    }

    /// Gathers leading-axis slices into a new tensor.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let stride = if self.shape[0] == 0 {
            0
        } else {
            self.data.len() / self.shape[0]
        };
        let mut data = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Self { shape, data }
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| G::from_f64c(v.to_f64c())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: F) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip("sub", other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip("mul", other, |a, b| a * b)
    }

    fn zip(&self, op: &'static str, other: &Self, f: impl Fn(F, F) -> F) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "add_assign",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn sum(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc + v)
    }

    pub fn sum_sq(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc + v * v)
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }
}

/// `a[m×k] · b[k×n]`.
pub fn matmul<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(Error::shape(
            "matmul",
            format!("[{m}×{k}] · [{k2}×{n}]"),
        ));
    }
    let mut out = vec![F::zero(); m * n];
    F::gemm(m, k, n, &a.data, [k as isize, 1], &b.data, [n as isize, 1], &mut out);
    finish("matmul", vec![m, n], out)
}

/// `aᵀ · b` for `a[k×m]`, `b[k×n]`, without materializing the transpose.
pub fn matmul_tn<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    let (k, m) = a.dims2("matmul_tn")?;
    let (k2, n) = b.dims2("matmul_tn")?;
    if k != k2 {
        return Err(Error::shape(
            "matmul_tn",
            format!("[{k}×{m}]ᵀ · [{k2}×{n}]"),
        ));
    }
    let mut out = vec![F::zero(); m * n];
    F::gemm(m, k, n, &a.data, [1, m as isize], &b.data, [n as isize, 1], &mut out);
    finish("matmul_tn", vec![m, n], out)
}

/// `a · bᵀ` for `a[m×k]`, `b[n×k]`.
pub fn matmul_nt<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    let (m, k) = a.dims2("matmul_nt")?;
    let (n, k2) = b.dims2("matmul_nt")?;
    if k != k2 {
        return Err(Error::shape(
            "matmul_nt",
            format!("[{m}×{k}] · [{n}×{k2}]ᵀ"),
        ));
    }
    let mut out = vec![F::zero(); m * n];
    F::gemm(m, k, n, &a.data, [k as isize, 1], &b.data, [1, k as isize], &mut out);
    finish("matmul_nt", vec![m, n], out)
}

/// Eight independent partial sums so the loop vectorizes; symmetric in its
/// arguments.
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [F::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = F::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Adds `bias[n]` to every row of `x[m×n]` in place.
pub fn add_row_bias<F: Scalar>(x: &mut Tensor<F>, bias: &Tensor<F>) -> Result<()> {
    let (_, n) = x.dims2("add_row_bias")?;
    if bias.len() != n {
        return Err(Error::shape(
            "add_row_bias",
            format!("{} columns vs bias of {}", n, bias.len()),
        ));
    }
    for row in x.data.chunks_mut(n) {
        for (v, &b) in row.iter_mut().zip(&bias.data) {
            *v = *v + b;
        }
    }
    Ok(())
}

/// Column sums of `x[m×n]`: the gradient of a broadcast row bias.
pub fn sum_rows<F: Scalar>(x: &Tensor<F>) -> Result<Tensor<F>> {
    let (_, n) = x.dims2("sum_rows")?;
    let mut out = vec![F::zero(); n];
    for row in x.data.chunks(n.max(1)) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
    Ok(Tensor {
        shape: vec![n],
        data: out,
    })
}

/// `x · w + b`, the affine map used by every linear layer here.
pub fn linear<F: Scalar>(x: &Tensor<F>, w: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    let mut out = matmul(x, w)?;
    add_row_bias(&mut out, b)?;
    Ok(out)
}

/// Gradients of [`linear`]: `(dx, dw, db)`.
pub fn linear_backward<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    grad_out: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
    let dx = matmul_nt(grad_out, w)?;
    let dw = matmul_tn(x, grad_out)?;
    let db = sum_rows(grad_out)?;
    Ok((dx, dw, db))
}

fn finish<F: Scalar>(op: &'static str, shape: Vec<usize>, data: Vec<F>) -> Result<Tensor<F>> {
    let t = Tensor { shape, data };
    t.ensure_finite(op)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_times_matrix_is_matrix() {
        let a = Tensor::<f64>::from_rows(&[&[1.0, -2.0, 0.5], &[3.0, 4.0, 7.0]]);
        let i = Tensor::identity(2);
        assert_eq!(matmul(&i, &a).unwrap(), a);
    }

    #[test]
    fn matmul_hand_case() {
        let a = Tensor::<f32>::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Tensor::from_rows(&[&[5.0], &[6.0]]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_by_zero_is_zero() {
        let mut rng = Rng::new(3);
        let a = Tensor::<f32>::randn(&[4, 5], 1.0, &mut rng);
        let z = Tensor::zeros(&[5, 3]);
        assert!(matmul(&a, &z).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        assert!(matches!(matmul(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn transposed_variants_agree_with_plain_matmul() {
        let mut rng = Rng::new(11);
        let a = Tensor::<f64>::randn(&[5, 4], 1.0, &mut rng);
        let b = Tensor::<f64>::randn(&[5, 3], 1.0, &mut rng);
        let at = transpose(&a);
        let tn = matmul_tn(&a, &b).unwrap();
        let reference = matmul(&at, &b).unwrap();
        for (x, y) in tn.data().iter().zip(reference.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let c = Tensor::<f64>::randn(&[6, 4], 1.0, &mut rng);
        let nt = matmul_nt(&a, &c).unwrap();
        let reference = matmul(&a, &transpose(&c)).unwrap();
        for (x, y) in nt.data().iter().zip(reference.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn new_rejects_non_finite_and_bad_length() {
        assert!(matches!(
            Tensor::<f32>::new(vec![2], vec![1.0, f32::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(Tensor::<f32>::new(vec![2, 2], vec![1.0; 3]).is_err());
    }

    fn transpose(a: &Tensor<f64>) -> Tensor<f64> {
        let (r, c) = a.dims2("t").unwrap();
        Tensor::from_fn(&[c, r], |idx| a.data()[(idx % r) * c + idx / r])
    }
}
