use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Conv2dGrads<F> {
    pub input: Tensor<F>,
    pub kernel: Tensor<F>,
    pub bias: Tensor<F>,
}

/// Output length of a floor-mode window scan: `floor((len − window)/stride) + 1`.
pub fn pooled_len(len: usize, window: usize, stride: usize) -> Result<usize> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidArgument("window and stride must be positive".into()));
    }
    if window > len {
        return Err(Error::InvalidArgument(format!(
            "window {window} larger than input length {len}"
        )));
    }
    Ok((len - window) / stride + 1)
}

/// Valid-padding, stride-1 cross-correlation.
///
/// `x: [N, Cin, H, W]`, `kernel: [Cout, Cin, kh, kw]`, `bias: [Cout]`.
pub fn conv2d<F: Scalar>(x: &Tensor<F>, kernel: &Tensor<F>, bias: &Tensor<F>) -> Result<Tensor<F>> {
    let [n, cin, h, w] = x.dims4("conv2d")?;
    let [cout, kcin, kh, kw] = kernel.dims4("conv2d")?;
    if kcin != cin {
        return Err(Error::shape(
            "conv2d",
            format!("input has {cin} channels, kernel expects {kcin}"),
        ));
    }
    if bias.len() != cout {
        return Err(Error::shape("conv2d", format!("bias {} vs {cout} outputs", bias.len())));
    }
    if kh > h || kw > w {
        return Err(Error::InvalidArgument(format!(
            "kernel {kh}×{kw} larger than input {h}×{w}"
        )));
    }
    let (ho, wo) = (h - kh + 1, w - kw + 1);
    let xd = x.data();
    let kd = kernel.data();
    let mut out = vec![F::zero(); n * cout * ho * wo];
    for b in 0..n {
        for co in 0..cout {
            let plane = &mut out[(b * cout + co) * ho * wo..(b * cout + co + 1) * ho * wo];
            plane.iter_mut().for_each(|v| *v = bias.data()[co]);
            for ci in 0..cin {
                let xin = &xd[(b * cin + ci) * h * w..(b * cin + ci + 1) * h * w];
                for dy in 0..kh {
                    for dx in 0..kw {
                        let kv = kd[((co * cin + ci) * kh + dy) * kw + dx];
                        for oy in 0..ho {
                            let src = &xin[(oy + dy) * w + dx..(oy + dy) * w + dx + wo];
                            let dst = &mut plane[oy * wo..(oy + 1) * wo];
                            for (o, &s) in dst.iter_mut().zip(src) {
                                *o = *o + kv * s;
                            }
                        }
                    }
                }
            }
        }
    }
    let out = Tensor::new(vec![n, cout, ho, wo], out);
    out.map_err(|_| Error::NonFinite("conv2d"))
}

pub fn conv2d_backward<F: Scalar>(
    x: &Tensor<F>,
    kernel: &Tensor<F>,
    grad: &Tensor<F>,
) -> Result<Conv2dGrads<F>> {
    let [n, cin, h, w] = x.dims4("conv2d_backward")?;
    let [cout, _, kh, kw] = kernel.dims4("conv2d_backward")?;
    let (ho, wo) = (h - kh + 1, w - kw + 1);
    if grad.shape() != [n, cout, ho, wo] {
        return Err(Error::shape(
            "conv2d_backward",
            format!("grad {:?}, expected {:?}", grad.shape(), [n, cout, ho, wo]),
        ));
    }
    let xd = x.data();
    let kd = kernel.data();
    let gd = grad.data();
    let mut dx = vec![F::zero(); xd.len()];
    let mut dk = vec![F::zero(); kd.len()];
    let mut db = vec![F::zero(); cout];
    for b in 0..n {
        for co in 0..cout {
            let g = &gd[(b * cout + co) * ho * wo..(b * cout + co + 1) * ho * wo];
            db[co] = g.iter().fold(db[co], |a, &v| a + v);
            for ci in 0..cin {
                let base = (b * cin + ci) * h * w;
                for dy in 0..kh {
                    for dxk in 0..kw {
                        let kidx = ((co * cin + ci) * kh + dy) * kw + dxk;
                        let kv = kd[kidx];
                        let mut acc = F::zero();
                        for oy in 0..ho {
                            let off = base + (oy + dy) * w + dxk;
                            let grow = &g[oy * wo..(oy + 1) * wo];
                            let xs = &xd[off..off + wo];
                            for (&gv, &xv) in grow.iter().zip(xs) {
                                acc = acc + gv * xv;
                            }
                            for (d, &gv) in dx[off..off + wo].iter_mut().zip(grow) {
                                *d = *d + gv * kv;
                            }
                        }
                        dk[kidx] = dk[kidx] + acc;
                    }
                }
            }
        }
    }
    Ok(Conv2dGrads {
        input: Tensor::new(x.shape().to_vec(), dx)?,
        kernel: Tensor::new(kernel.shape().to_vec(), dk)?,
        bias: Tensor::new(vec![cout], db)?,
    })
}

/// Average pooling over the two trailing axes of `[N, C, H, W]`; trailing
/// partial windows are dropped.
pub fn avgpool2d<F: Scalar>(
    x: &Tensor<F>,
    window: (usize, usize),
    stride: (usize, usize),
) -> Result<Tensor<F>> {
    let [n, c, h, w] = x.dims4("avgpool2d")?;
    let ho = pooled_len(h, window.0, stride.0)?;
    let wo = pooled_len(w, window.1, stride.1)?;
    let scale = F::one() / F::from_usize(window.0 * window.1).unwrap();
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * ho * wo);
    for plane in xd.chunks(h * w) {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = F::zero();
                for py in 0..window.0 {
                    let row = (oy * stride.0 + py) * w + ox * stride.1;
                    for &v in &plane[row..row + window.1] {
                        acc = acc + v;
                    }
                }
                out.push(acc * scale);
            }
        }
    }
    Tensor::new(vec![n, c, ho, wo], out)
}

pub fn avgpool2d_backward<F: Scalar>(
    input_shape: &[usize],
    window: (usize, usize),
    stride: (usize, usize),
    grad: &Tensor<F>,
) -> Result<Tensor<F>> {
    let [n, c, h, w]: [usize; 4] = input_shape
        .try_into()
        .map_err(|_| Error::shape("avgpool2d_backward", format!("{input_shape:?}")))?;
    let ho = pooled_len(h, window.0, stride.0)?;
    let wo = pooled_len(w, window.1, stride.1)?;
    if grad.shape() != [n, c, ho, wo] {
        return Err(Error::shape(
            "avgpool2d_backward",
            format!("grad {:?}, expected {:?}", grad.shape(), [n, c, ho, wo]),
        ));
    }
    let scale = F::one() / F::from_usize(window.0 * window.1).unwrap();
    let mut dx = vec![F::zero(); n * c * h * w];
    for (plane, g) in dx.chunks_mut(h * w).zip(grad.data().chunks(ho * wo)) {
        for oy in 0..ho {
            for ox in 0..wo {
                let share = g[oy * wo + ox] * scale;
                for py in 0..window.0 {
                    let row = (oy * stride.0 + py) * w + ox * stride.1;
                    for v in &mut plane[row..row + window.1] {
                        *v = *v + share;
                    }
                }
            }
        }
    }
    Tensor::new(input_shape.to_vec(), dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = Rng::new(5);
        let x = Tensor::<f64>::randn(&[2, 1, 3, 4], 1.0, &mut rng);
        let k = Tensor::ones(&[1, 1, 1, 1]);
        let y = conv2d(&x, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn diagonal_kernel_hand_case() {
        let x = Tensor::<f64>::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let y = conv2d(&x, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[5.0]);
    }

    #[test]
    fn kernel_larger_than_input_fails() {
        let x = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        let k = Tensor::zeros(&[1, 1, 3, 1]);
        assert!(conv2d(&x, &k, &Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn avgpool_hand_case_and_constant() {
        let x = Tensor::<f64>::new(vec![1, 1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = avgpool2d(&x, (1, 2), (1, 2)).unwrap();
        assert_eq!(y.data(), &[1.5, 3.5]);

        let c = Tensor::<f64>::full(&[1, 2, 1, 9], 0.25);
        let y = avgpool2d(&c, (1, 3), (1, 2)).unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn pooled_length_floor_semantics() {
        assert_eq!(pooled_len(226, 51, 5).unwrap(), 36);
        assert!(pooled_len(50, 51, 5).is_err());
    }
}
