//! Independent reference implementations used by the property and
//! acceptance tests. Written for clarity, not speed.

#![allow(dead_code)]

use std::collections::HashMap;

/// Cosine similarity as `a·b / (‖a‖‖b‖)`.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Rank of every candidate by exhaustive pairwise comparison: the number of
/// candidates strictly more similar, plus equally similar ones with a lower
/// index. Returns the first `k` candidates by rank.
pub fn brute_force_topk(queries: &[Vec<f64>], candidates: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    queries
        .iter()
        .map(|q| {
            let sims: Vec<f64> = candidates.iter().map(|c| cosine(q, c)).collect();
            let mut ranked = vec![usize::MAX; candidates.len()];
            for j in 0..sims.len() {
                let rank = (0..sims.len())
                    .filter(|&l| sims[l] > sims[j] || (sims[l] == sims[j] && l < j))
                    .count();
                ranked[rank] = j;
            }
            ranked.truncate(k);
            ranked
        })
        .collect()
}

/// Counts queries whose ground truth is among the `k` most similar.
pub fn brute_force_topk_accuracy(queries: &[Vec<f64>], candidates: &[Vec<f64>], truth: &[usize], k: usize) -> f64 {
    let hits = queries
        .iter()
        .zip(truth)
        .filter(|(q, &gt)| {
            let s_gt = cosine(q, &candidates[gt]);
            let better = candidates
                .iter()
                .enumerate()
                .filter(|(l, c)| {
                    let s = cosine(q, c);
                    s > s_gt || (s == s_gt && *l < gt)
                })
                .count();
            better < k
        })
        .count();
    hits as f64 / queries.len() as f64
}

/// Same-category, non-ground-truth items among the top 5, over `5M`.
pub fn brute_force_concept_accuracy(
    top5: &[Vec<usize>],
    truth: &[usize],
    ids: &[String],
    category: &HashMap<String, usize>,
) -> f64 {
    let mut count = 0;
    for (ranking, &gt) in top5.iter().zip(truth) {
        for &j in ranking.iter().take(5) {
            if ids[j] != ids[gt] && category[&ids[j]] == category[&ids[gt]] {
                count += 1;
            }
        }
    }
    count as f64 / (5 * top5.len()) as f64
}

pub struct OlsOracle {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub p_value: f64,
}

/// Least squares through the 2×2 normal equations, with the two-sided
/// slope p-value from quadrature of the Student-t density.
pub fn ols_oracle(x: &[f64], y: &[f64]) -> OlsOracle {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    // [n sx; sx sxx] [b0; b1] = [sy; sxy]
    let det = n * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope = (n * sxy - sx * sy) / det;
    let mean_y = sy / n;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let sst: f64 = y.iter().map(|b| (b - mean_y).powi(2)).sum();
    let df = n - 2.0;
    let var_slope = sse / df / (sxx - sx * sx / n);
    let t = slope / var_slope.sqrt();
    OlsOracle {
        slope,
        intercept,
        r2: 1.0 - sse / sst,
        p_value: t_two_sided_quadrature(t, df),
    }
}

/// `P(|T| ≥ |t|)` by Simpson's rule. With `x = √ν·tan θ` the density is
/// proportional to `cos^{ν−1} θ` on `[0, π/2)`, so the tail is the ratio
/// of two smooth integrals.
pub fn t_two_sided_quadrature(t: f64, df: f64) -> f64 {
    let f = |th: f64| th.cos().powf(df - 1.0);
    let theta0 = (t.abs() / df.sqrt()).atan();
    let half_pi = std::f64::consts::FRAC_PI_2;
    simpson(f, theta0, half_pi, 20_000) / simpson(f, 0.0, half_pi, 20_000)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}
