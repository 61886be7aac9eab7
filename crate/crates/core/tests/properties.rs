mod common;

use common::oracle;
use neuroalign::align::{contrastive_loss, Temperature};
use neuroalign::data::{zscore_channels, EmbeddingBank, NeuralDataset};
use neuroalign::eval::{linear_regression, retrieve_topk};
use neuroalign::tensor::{dropout_mask, matmul, softmax_rows};
use neuroalign::{Rng, Tensor};
use proptest::prelude::*;

fn gaussian(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::randn(shape, 1.0, &mut Rng::new(seed))
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut p);
    p
}

/// Orthogonal matrix from Gram-Schmidt on a Gaussian draw.
fn orthogonal(d: usize, seed: u64) -> Tensor<f64> {
    let g = gaussian(&[d, d], seed);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let mut v: Vec<f64> = (0..d).map(|i| g.data()[i * d + j]).collect();
        for q in &cols {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= n);
        cols.push(v);
    }
    Tensor::from_fn(&[d, d], |k| cols[k % d][k / d])
}

fn row_scaled<F: neuroalign::Scalar>(x: &Tensor<F>, scales: &[f64]) -> Tensor<F> {
    let d = x.shape()[1];
    Tensor::from_fn(x.shape(), |k| x.data()[k] * F::from_f64c(scales[k / d]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_is_symmetric_under_modality_swap(m in 1usize..40, d in 1usize..24, seed: u64, tau in 0.01f64..2.0) {
        let t = Temperature::from_tau(tau, 0.01).unwrap();
        let v = gaussian(&[m, d], seed);
        let w = gaussian(&[m, d], seed ^ 1);
        prop_assert_eq!(contrastive_loss(&v, &w, &t).unwrap().loss, contrastive_loss(&w, &v, &t).unwrap().loss);
        let (v, w) = (v.cast::<f32>(), w.cast::<f32>());
        prop_assert_eq!(contrastive_loss(&v, &w, &t).unwrap().loss, contrastive_loss(&w, &v, &t).unwrap().loss);
    }

    #[test]
    fn loss_is_invariant_to_joint_row_permutation(m in 1usize..40, d in 2usize..24, seed: u64) {
        let t = Temperature::from_tau(0.07, 0.01).unwrap();
        let v = gaussian(&[m, d], seed);
        let w = gaussian(&[m, d], seed ^ 2);
        let p = permutation(m, seed);
        let a = contrastive_loss(&v, &w, &t).unwrap().loss;
        let b = contrastive_loss(&v.select_rows(&p), &w.select_rows(&p), &t).unwrap().loss;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn loss_is_invariant_to_positive_row_rescaling(m in 1usize..40, d in 2usize..24, seed: u64) {
        let t = Temperature::from_tau(0.07, 0.01).unwrap();
        let v = gaussian(&[m, d], seed).cast::<f32>();
        let w = gaussian(&[m, d], seed ^ 3).cast::<f32>();
        let mut rng = Rng::new(seed ^ 4);
        let sv: Vec<f64> = (0..m).map(|_| 0.1 + 9.9 * rng.uniform()).collect();
        let sw: Vec<f64> = (0..m).map(|_| 0.1 + 9.9 * rng.uniform()).collect();
        let a = contrastive_loss(&v, &w, &t).unwrap().loss;
        let b = contrastive_loss(&row_scaled(&v, &sv), &row_scaled(&w, &sw), &t).unwrap().loss;
        prop_assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn loss_is_non_negative(m in 1usize..30, d in 1usize..16, seed: u64) {
        let t = Temperature::from_tau(0.07, 0.01).unwrap();
        let out = contrastive_loss(&gaussian(&[m, d], seed), &gaussian(&[m, d], !seed), &t).unwrap();
        prop_assert!(out.loss >= 0.0);
    }

    #[test]
    fn softmax_rows_sum_to_one(m in 1usize..20, n in 1usize..30, seed: u64, spread in 0.1f64..200.0) {
        let x = gaussian(&[m, n], seed).scale(spread);
        let s = softmax_rows(&x).unwrap();
        for i in 0..m {
            let total: f64 = s.row(i).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(s.row(i).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn matmul_identity_and_distributivity(m in 1usize..12, k in 1usize..12, n in 1usize..12, seed: u64) {
        let a = gaussian(&[m, k], seed);
        prop_assert_eq!(&matmul(&a, &Tensor::identity(k)).unwrap(), &a);
        prop_assert_eq!(&matmul(&Tensor::identity(m), &a).unwrap(), &a);
        let b = gaussian(&[k, n], seed ^ 5);
        let c = gaussian(&[k, n], seed ^ 6);
        let lhs = matmul(&a, &b.add(&c).unwrap()).unwrap();
        let rhs = matmul(&a, &b).unwrap().add(&matmul(&a, &c).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12 * (k as f64) * 10.0);
    }

    #[test]
    fn zscore_commutes_with_trial_permutation(n in 2usize..12, c in 1usize..5, t in 1usize..9, seed: u64) {
        let x = gaussian(&[n, c, t], seed).cast::<f32>();
        let p = permutation(n, seed);
        let a = zscore_channels(&x).unwrap().select_rows(&p);
        let b = zscore_channels(&x.select_rows(&p)).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn averaging_then_zscore_is_permutation_invariant(images in 2usize..6, reps in 1usize..4, seed: u64) {
        let n = images * reps;
        let ids: Vec<String> = (0..n).map(|i| format!("img{}", i % images)).collect();
        let order: Vec<String> = (0..images).map(|i| format!("img{i}")).collect();
        let trials = gaussian(&[n, 2, 3], seed).cast::<f32>();
        let ds = NeuralDataset::new("s", vec!["a".into(), "b".into()], 100.0, trials, ids).unwrap();
        let p = permutation(n, seed);
        let shuffled = NeuralDataset {
            trials: ds.trials.select_rows(&p),
            image_ids: p.iter().map(|&i| ds.image_ids[i].clone()).collect(),
            ..ds.clone()
        };
        let a = ds.average_repetitions_over(&order).unwrap().zscore_channels().unwrap();
        let b = shuffled.average_repetitions_over(&order).unwrap().zscore_channels().unwrap();
        prop_assert!(a.trials.sub(&b.trials).unwrap().max_abs() < 1e-5);
    }

    #[test]
    fn retrieval_ignores_row_scale_and_shared_rotation(m in 1usize..20, n in 5usize..30, d in 2usize..10, seed: u64) {
        let q = gaussian(&[m, d], seed);
        let c = gaussian(&[n, d], seed ^ 7);
        let base = retrieve_topk(&q, &c, 5).unwrap();
        let mut rng = Rng::new(seed ^ 8);
        let sq: Vec<f64> = (0..m).map(|_| 0.01 + 100.0 * rng.uniform()).collect();
        let sc: Vec<f64> = (0..n).map(|_| 0.01 + 100.0 * rng.uniform()).collect();
        prop_assert_eq!(&retrieve_topk(&row_scaled(&q, &sq), &row_scaled(&c, &sc), 5).unwrap(), &base);
        let r = orthogonal(d, seed ^ 9);
        prop_assert_eq!(&retrieve_topk(&matmul(&q, &r).unwrap(), &matmul(&c, &r).unwrap(), 5).unwrap(), &base);
    }

    #[test]
    fn retrieval_matches_brute_force(m in 1usize..15, n in 1usize..20, d in 1usize..6, seed: u64) {
        let q = gaussian(&[m, d], seed);
        let c = gaussian(&[n, d], seed ^ 10);
        let rows = |t: &Tensor<f64>| (0..t.shape()[0]).map(|i| t.row(i).to_vec()).collect::<Vec<_>>();
        prop_assert_eq!(retrieve_topk(&q, &c, n).unwrap(), oracle::brute_force_topk(&rows(&q), &rows(&c), n));
    }

    #[test]
    fn regression_matches_normal_equations(n in 3usize..40, seed: u64, noise in 0.01f64..5.0) {
        let mut rng = Rng::new(seed);
        let x: Vec<f64> = (0..n).map(|_| 10.0 * rng.uniform() + 15.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 3.0 + noise * rng.normal()).collect();
        prop_assume!(x.iter().any(|v| *v != x[0]));
        let got = linear_regression(&x, &y).unwrap();
        let want = oracle::ols_oracle(&x, &y);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        prop_assert!(rel(got.slope, want.slope) < 1e-9, "slope {} vs {}", got.slope, want.slope);
        prop_assert!(rel(got.intercept, want.intercept) < 1e-9);
        prop_assert!(rel(got.r2, want.r2) < 1e-9);
        prop_assert!((got.p_value - want.p_value).abs() < 1e-6, "p {} vs {}", got.p_value, want.p_value);
        prop_assert!((0.0..=1.0).contains(&got.r2) && got.p_value > 0.0 && got.p_value <= 1.0);
    }

    #[test]
    fn bank_roundtrips_bit_exactly(count in 1usize..20, dim in 1usize..10, layer in 1usize..8, extra in 0usize..8, seed: u64) {
        let ids: Vec<String> = (0..count).map(|i| format!("item-{seed}-{i}")).collect();
        let matrix = gaussian(&[count, dim], seed).cast::<f32>();
        let bank = EmbeddingBank::new("net", layer, (layer + extra).max(2), "mean_tokens", ids, matrix).unwrap();
        let back = EmbeddingBank::from_bytes(&bank.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(&back, &bank);
        let bits = |b: &EmbeddingBank| b.matrix.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&bank));
    }
}

#[test]
fn dropout_mask_is_unbiased() {
    for (p, seed) in [(0.1, 1u64), (0.3, 2), (0.5, 3), (0.9, 4)] {
        let mut rng = Rng::new(seed);
        let total: f64 = (0..100_000)
            .map(|_| dropout_mask::<f64>(&[1], p, &mut rng).unwrap().data()[0])
            .sum();
        let mean = total / 100_000.0;
        assert!((mean - 1.0).abs() < 0.01, "p = {p}: mean {mean}");
    }
}

#[test]
fn t_quadrature_oracle_is_sane() {
    assert!((oracle::t_two_sided_quadrature(2.776445105, 4.0) - 0.05).abs() < 1e-8);
    assert!((oracle::t_two_sided_quadrature(0.0, 3.0) - 1.0).abs() < 1e-12);
}
