//! Central finite-difference checks of every hand-written backward pass,
//! run in `f64`.
//!
//! Each check builds a scalar objective (a fixed random weighting of the
//! op's output, or the loss itself), perturbs every input and parameter
//! entry by `±h`, and compares the numerical gradient against the analytic
//! one per tensor as `‖g_a − g_n‖ / max(‖g_a‖, ‖g_n‖)`.

use crate::align::{contrastive_loss, AlignmentModel, Projector, ProjectorMode, Temperature, TrainConfig};
use crate::encoders::{Arch, Encoder, EncoderDims, TsConvGeometry};
use crate::error::Result;
use crate::tensor::{
    avgpool2d, avgpool2d_backward, conv2d, conv2d_backward, dropout_backward, dropout_forward, gelu,
    gelu_backward, l2_normalize, l2_normalize_backward, layer_norm, layer_norm_backward, linear,
    linear_backward, Rng, Tensor, LAYER_NORM_EPS,
};

/// Problem sizes for the checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckDims {
    pub batch: usize,
    pub channels: usize,
    pub time_points: usize,
    pub embed_dim: usize,
    pub shared_dim: usize,
    pub image_dim: usize,
}

impl Default for GradCheckDims {
    fn default() -> Self {
        Self {
            batch: 4,
            channels: 4,
            time_points: 8,
            embed_dim: 16,
            shared_dim: 8,
            image_dim: 12,
        }
    }
}

/// TSConv geometry small enough for an 8-sample series.
pub const SMALL_TSCONV: TsConvGeometry = TsConvGeometry {
    filters: 3,
    temporal_kernel: 3,
    pool_window: 3,
    pool_stride: 2,
};

pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// `suite/tensor`.
    pub name: String,
    pub rel_error: f64,
    pub entries: usize,
}

fn rel_error(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> f64 {
    let diff: f64 = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = analytic.sum_sq().sqrt().max(numeric.sum_sq().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Compares `analytic[i]` with central differences of `objective` over
/// every entry of `inputs[i]`.
pub fn check_tensors(
    suite: &str,
    names: &[&str],
    inputs: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    objective: impl Fn(&[Tensor<f64>]) -> Result<f64>,
) -> Result<Vec<GradCheck>> {
    let mut out = Vec::with_capacity(inputs.len());
    let mut work = inputs.to_vec();
    for i in 0..inputs.len() {
        let mut numeric = Tensor::zeros(inputs[i].shape());
        for e in 0..inputs[i].len() {
            let orig = inputs[i].data()[e];
            work[i].data_mut()[e] = orig + FD_STEP;
            let up = objective(&work)?;
            work[i].data_mut()[e] = orig - FD_STEP;
            let down = objective(&work)?;
            work[i].data_mut()[e] = orig;
            numeric.data_mut()[e] = (up - down) / (2.0 * FD_STEP);
        }
        out.push(GradCheck {
            name: format!("{suite}/{}", names.get(i).copied().unwrap_or("?")),
            rel_error: rel_error(&analytic[i], &numeric),
            entries: inputs[i].len(),
        });
    }
    Ok(out)
}

fn weighted(out: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn randn(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    Tensor::randn(shape, 1.0, rng)
}

/// Backward passes of the tensor kernels.
pub fn check_ops(dims: &GradCheckDims, seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = Rng::new(seed);
    let (m, c, t, d) = (dims.batch, dims.channels, dims.time_points, dims.embed_dim);
    let mut all = Vec::new();

    // linear (matmul, matmul_tn, matmul_nt, bias)
    let (x, w, b) = (randn(&[m, d], &mut rng), randn(&[d, dims.shared_dim], &mut rng), randn(&[dims.shared_dim], &mut rng));
    let r = randn(&[m, dims.shared_dim], &mut rng);
    let (dx, dw, db) = linear_backward(&x, &w, &r)?;
    all.extend(check_tensors("linear", &["x", "w", "b"], &[x, w, b], &[dx, dw, db], |p| {
        Ok(weighted(&linear(&p[0], &p[1], &p[2])?, &r))
    })?);

    let x = randn(&[m, d], &mut rng);
    let r = randn(&[m, d], &mut rng);
    let dx = gelu_backward(&x, &r)?;
    all.extend(check_tensors("gelu", &["x"], &[x], &[dx], |p| Ok(weighted(&gelu(&p[0]), &r)))?);

    let x = randn(&[m, d], &mut rng);
    let r = randn(&[m, d], &mut rng);
    let (xh, norms) = l2_normalize(&x)?;
    let dx = l2_normalize_backward(&xh, &norms, &r)?;
    all.extend(check_tensors("l2_normalize", &["x"], &[x], &[dx], |p| {
        Ok(weighted(&l2_normalize(&p[0])?.0, &r))
    })?);

    let (x, g, b) = (randn(&[m, d], &mut rng), randn(&[d], &mut rng), randn(&[d], &mut rng));
    let r = randn(&[m, d], &mut rng);
    let (_, cache) = layer_norm(&x, &g, &b, LAYER_NORM_EPS)?;
    let grads = layer_norm_backward(&cache, &g, &r)?;
    all.extend(check_tensors(
        "layer_norm",
        &["x", "gamma", "beta"],
        &[x, g, b],
        &[grads.input, grads.gamma, grads.beta],
        |p| Ok(weighted(&layer_norm(&p[0], &p[1], &p[2], LAYER_NORM_EPS)?.0, &r)),
    )?);

    let x = randn(&[m, d], &mut rng);
    let r = randn(&[m, d], &mut rng);
    let mask_seed = rng.next_u64();
    let (_, mask) = dropout_forward(&x, 0.3, Some(&mut Rng::new(mask_seed)))?;
    let dx = dropout_backward(mask.as_ref(), &r)?;
    all.extend(check_tensors("dropout", &["x"], &[x], &[dx], |p| {
        Ok(weighted(&dropout_forward(&p[0], 0.3, Some(&mut Rng::new(mask_seed)))?.0, &r))
    })?);

    // temporal kernel over [M, 1, C, T] and a spatial kernel spanning channels
    for (suite, xs, ks) in [
        ("conv2d_temporal", [m, 1, c, t], [3, 1, 1, 3]),
        ("conv2d_spatial", [m, 3, c, 2], [2, 3, c, 1]),
    ] {
        let (x, k) = (randn(&xs, &mut rng), randn(&ks, &mut rng));
        let b = randn(&[ks[0]], &mut rng);
        let out = conv2d(&x, &k, &b)?;
        let r = randn(out.shape(), &mut rng);
        let grads = conv2d_backward(&x, &k, &r)?;
        all.extend(check_tensors(
            suite,
            &["x", "kernel", "bias"],
            &[x, k, b],
            &[grads.input, grads.kernel, grads.bias],
            |p| Ok(weighted(&conv2d(&p[0], &p[1], &p[2])?, &r)),
        )?);
    }

    let x = randn(&[m, 2, c, t], &mut rng);
    let (win, stride) = ((1, 3), (1, 2));
    let r = randn(avgpool2d(&x, win, stride)?.shape(), &mut rng);
    let dx = avgpool2d_backward(x.shape(), win, stride, &r)?;
    all.extend(check_tensors("avgpool2d", &["x"], &[x], &[dx], |p| {
        Ok(weighted(&avgpool2d(&p[0], win, stride)?, &r))
    })?);

    Ok(all)
}

/// Contrastive loss w.r.t. both embedding matrices and the log-scale.
pub fn check_loss(dims: &GradCheckDims, seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = Rng::new(seed);
    let v = randn(&[dims.batch, dims.shared_dim], &mut rng);
    let w = randn(&[dims.batch, dims.shared_dim], &mut rng);
    // τ = 0.5 keeps the softmax away from saturation at this scale.
    let t = Temperature::from_tau(0.5, 0.01)?;
    let out = contrastive_loss(&v, &w, &t)?;
    let s = Tensor::full(&[1], t.log_scale);
    let temp = |p: &[Tensor<f64>]| Temperature {
        log_scale: p[2].data()[0],
        max_log_scale: t.max_log_scale,
    };
    check_tensors(
        "contrastive_loss",
        &["v", "w", "log_scale"],
        &[v, w, s],
        &[out.grad_v, out.grad_w, Tensor::full(&[1], out.grad_log_scale)],
        |p| Ok(contrastive_loss(&p[0], &p[1], &temp(p))?.loss),
    )
}

fn encoder_dims(dims: &GradCheckDims) -> EncoderDims {
    EncoderDims {
        channels: dims.channels,
        time_points: dims.time_points,
        embed_dim: dims.embed_dim,
        dropout_p: 0.3,
        tsconv: SMALL_TSCONV,
    }
}

fn set_params<M: Clone>(model: &M, values: &[Tensor<f64>], params_mut: impl Fn(&mut M) -> Vec<&mut Tensor<f64>>) -> M {
    let mut m = model.clone();
    for (slot, v) in params_mut(&mut m).into_iter().zip(values) {
        *slot = v.clone();
    }
    m
}

/// Encoder parameters and input, with dropout active under a fixed mask.
pub fn check_encoder(arch: Arch, dims: &GradCheckDims, seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = Rng::new(seed);
    let enc = Encoder::<f64>::init(arch, &encoder_dims(dims), &mut rng)?;
    let x = randn(&[dims.batch, dims.channels, dims.time_points], &mut rng);
    let r = randn(&[dims.batch, dims.embed_dim], &mut rng);
    let mask_seed = rng.next_u64();
    let (_, cache) = enc.forward(&x, Some(&mut Rng::new(mask_seed)))?;
    let (grads, dx) = enc.backward(&cache, &r)?;

    let names: Vec<String> = enc.params().iter().map(|p| p.name.clone()).chain(["input".into()]).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut inputs: Vec<Tensor<f64>> = enc.params().iter().map(|p| p.tensor.clone()).collect();
    inputs.push(x);
    let mut analytic: Vec<Tensor<f64>> = grads.params().iter().map(|p| p.tensor.clone()).collect();
    analytic.push(dx);
    let np = analytic.len() - 1;
    check_tensors(&arch.to_string(), &names, &inputs, &analytic, |p| {
        let e = set_params(&enc, &p[..np], |m| m.params_mut());
        Ok(weighted(&e.forward(&p[np], Some(&mut Rng::new(mask_seed)))?.0, &r))
    })
}

/// Linear projectors w.r.t. their parameters and the neural input.
pub fn check_projector(dims: &GradCheckDims, seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = Rng::new(seed);
    let proj = Projector::<f64>::init(ProjectorMode::Linear, dims.embed_dim, dims.image_dim, dims.shared_dim, &mut rng)?;
    let zn = randn(&[dims.batch, dims.embed_dim], &mut rng);
    let zi = randn(&[dims.batch, dims.image_dim], &mut rng);
    let rv = randn(&[dims.batch, dims.shared_dim], &mut rng);
    let rw = randn(&[dims.batch, dims.shared_dim], &mut rng);
    let (grads, dz) = proj.backward(&zn, &zi, &rv, &rw)?;
    let params = |p: &Projector<f64>| {
        let mut out = Vec::new();
        p.params(&mut out);
        out.into_iter().map(|p| (p.name, p.tensor.clone())).collect::<Vec<_>>()
    };
    let (mut names, mut inputs): (Vec<String>, Vec<Tensor<f64>>) = params(&proj).into_iter().unzip();
    names.push("z_neural".into());
    inputs.push(zn);
    let mut analytic: Vec<Tensor<f64>> = params(&grads).into_iter().map(|(_, t)| t).collect();
    analytic.push(dz);
    let np = analytic.len() - 1;
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    check_tensors("projector", &names, &inputs, &analytic, |p| {
        let pr = set_params(&proj, &p[..np], |m| {
            let mut out = Vec::new();
            m.params_mut(&mut out);
            out
        });
        let (v, w) = pr.project(&p[np], &zi)?;
        Ok(weighted(&v, &rv) + weighted(&w, &rw))
    })
}

/// Encoder → projectors → loss, w.r.t. every trainable including the
/// log-temperature.
pub fn check_end_to_end(arch: Arch, dims: &GradCheckDims, seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = Rng::new(seed);
    let config = TrainConfig {
        arch,
        embed_dim: dims.embed_dim,
        shared_dim: dims.shared_dim,
        tsconv: SMALL_TSCONV,
        initial_tau: 0.5,
        ..TrainConfig::default()
    };
    let model = AlignmentModel::<f64>::init(&config, dims.channels, dims.time_points, dims.image_dim, &mut rng)?;
    let x = randn(&[dims.batch, dims.channels, dims.time_points], &mut rng);
    let img = randn(&[dims.batch, dims.image_dim], &mut rng);
    let mask_seed = rng.next_u64();
    let step = model.loss_and_grads(&x, &img, Some(&mut Rng::new(mask_seed)))?;
    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let inputs: Vec<Tensor<f64>> = model.params().iter().map(|p| p.tensor.clone()).collect();
    let analytic: Vec<Tensor<f64>> = step.grads.params().iter().map(|p| p.tensor.clone()).collect();
    check_tensors(&format!("end_to_end_{arch}"), &names, &inputs, &analytic, |p| {
        let m = set_params(&model, p, |m| m.params_mut());
        Ok(m.loss_and_grads(&x, &img, Some(&mut Rng::new(mask_seed)))?.loss)
    })
}

/// Every check above.
pub fn check_all(dims: &GradCheckDims, seed: u64) -> Result<Vec<GradCheck>> {
    let mut all = check_ops(dims, seed)?;
    all.extend(check_loss(dims, seed + 1)?);
    all.extend(check_encoder(Arch::EegProject, dims, seed + 2)?);
    all.extend(check_encoder(Arch::TsConv, dims, seed + 3)?);
    all.extend(check_projector(dims, seed + 4)?);
    all.extend(check_end_to_end(Arch::EegProject, dims, seed + 5)?);
    all.extend(check_end_to_end(Arch::TsConv, dims, seed + 6)?);
    Ok(all)
}
