use std::cmp::Ordering;
use std::collections::HashMap;

use crate::data::Category;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn unit_rows<F: Scalar>(x: &Tensor<F>, what: &'static str) -> Result<(usize, usize, Vec<f64>)> {
    let (n, d) = x.dims2(what)?;
    let mut out = Vec::with_capacity(n * d);
    for r in 0..n {
        let row = x.row(r);
        let norm = row.iter().map(|v| v.to_f64c().powi(2)).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite(what));
        }
        if norm == 0.0 {
            return Err(Error::ZeroNorm { row: r });
        }
        out.extend(row.iter().map(|v| v.to_f64c() / norm));
    }
    Ok((n, d, out))
}

/// Cosine similarities `[M, N]`, row-major, computed in `f64`.
pub fn cosine_similarity<F: Scalar>(queries: &Tensor<F>, candidates: &Tensor<F>) -> Result<Vec<f64>> {
    let (m, dq, q) = unit_rows(queries, "retrieve_topk queries")?;
    let (n, dc, c) = unit_rows(candidates, "retrieve_topk candidates")?;
    if dq != dc {
        return Err(Error::shape(
            "retrieve_topk",
            format!("queries have width {dq}, candidates {dc}"),
        ));
    }
    let mut sim = vec![0.0; m * n];
    for i in 0..m {
        let qi = &q[i * dq..(i + 1) * dq];
        for j in 0..n {
            let cj = &c[j * dq..(j + 1) * dq];
            sim[i * n + j] = qi.iter().zip(cj).map(|(a, b)| a * b).sum();
        }
    }
    Ok(sim)
}

/// Most-similar-first order; equal similarities go to the lower index.
fn by_similarity(sims: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b))
}

/// For each query, the indices of the `k` most cosine-similar candidates in
/// descending order. Ties go to the lowest candidate index.
pub fn retrieve_topk<F: Scalar>(queries: &Tensor<F>, candidates: &Tensor<F>, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = candidates.dims2("retrieve_topk")?.0;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} with {n} candidates")));
    }
    let sim = cosine_similarity(queries, candidates)?;
    Ok(sim
        .chunks(n.max(1))
        .map(|row| {
            let cmp = by_similarity(row);
            let mut idx: Vec<usize> = (0..n).collect();
            if k < n {
                idx.select_nth_unstable_by(k - 1, &cmp);
                idx.truncate(k);
            }
            idx.sort_unstable_by(&cmp);
            idx
        })
        .collect())
}

/// Fraction of queries whose ground-truth candidate is among the first `k`.
pub fn topk_accuracy(rankings: &[Vec<usize>], ground_truth: &[usize], k: usize) -> f64 {
    if rankings.is_empty() {
        return 0.0;
    }
    let hits = rankings
        .iter()
        .zip(ground_truth)
        .filter(|(r, gt)| r.iter().take(k).any(|j| j == *gt))
        .count();
    hits as f64 / rankings.len() as f64
}

/// Top-5 category agreement: for each query, the retrieved items other than
/// the ground-truth image whose category equals the query's, summed and
/// divided by `5M`.
pub fn concept_accuracy(
    rankings: &[Vec<usize>],
    ground_truth: &[usize],
    candidate_ids: &[String],
    category_of: &HashMap<String, Category>,
) -> Result<f64> {
    if rankings.len() != ground_truth.len() {
        return Err(Error::shape(
            "concept_accuracy",
            format!("{} rankings, {} ground truths", rankings.len(), ground_truth.len()),
        ));
    }
    if rankings.is_empty() {
        return Ok(0.0);
    }
    let category = |j: usize| -> Result<Category> {
        let id = candidate_ids
            .get(j)
            .ok_or_else(|| Error::InvalidArgument(format!("candidate index {j} out of range")))?;
        category_of
            .get(id)
            .copied()
            .ok_or_else(|| Error::MissingCategory(id.clone()))
    };
    let mut matches = 0usize;
    for (ranking, &gt) in rankings.iter().zip(ground_truth) {
        if ranking.len() < 5 {
            return Err(Error::InvalidArgument(format!(
                "concept accuracy needs top-5 rankings, got {}",
                ranking.len()
            )));
        }
        let want = category(gt)?;
        for &j in &ranking[..5] {
            if candidate_ids[j] != candidate_ids[gt] && category(j)? == want {
                matches += 1;
            }
        }
    }
    Ok(matches as f64 / (5 * rankings.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(rows)
    }

    #[test]
    fn exact_match_ranks_first() {
        let c = t(&[&[1.0, 0.0], &[0.6, 0.8], &[0.0, 1.0]]);
        let q = t(&[&[0.6, 0.8]]);
        assert_eq!(retrieve_topk(&q, &c, 1).unwrap(), vec![vec![1]]);
    }

    #[test]
    fn hand_built_three_by_three() {
        let c = t(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let q = t(&[&[1.0, 0.1], &[0.1, 1.0], &[1.0, 1.0]]);
        let r = retrieve_topk(&q, &c, 3).unwrap();
        assert_eq!(r, vec![vec![0, 1, 2], vec![2, 1, 0], vec![1, 0, 2]]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = t(&[&[0.0, 1.0], &[1.0, 0.0], &[2.0, 0.0], &[1.0, 0.0]]);
        let q = t(&[&[1.0, 0.0]]);
        assert_eq!(retrieve_topk(&q, &c, 3).unwrap(), vec![vec![1, 2, 3]]);
    }

    #[test]
    fn k_equal_n_is_permutation() {
        let c = Tensor::<f64>::from_fn(&[7, 3], |i| ((i * 37 % 11) as f64) - 4.5);
        let q = Tensor::<f64>::from_fn(&[2, 3], |i| i as f64 + 1.0);
        for mut r in retrieve_topk(&q, &c, 7).unwrap() {
            r.sort();
            assert_eq!(r, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_row_and_bad_k() {
        let c = t(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let q = t(&[&[1.0, 0.0]]);
        assert!(matches!(retrieve_topk(&q, &c, 1), Err(Error::ZeroNorm { row: 1 })));
        let c = t(&[&[1.0, 0.0]]);
        assert!(retrieve_topk(&q, &c, 2).is_err());
        assert!(retrieve_topk(&q, &c, 0).is_err());
    }

    #[test]
    fn accuracy_cases() {
        let perfect = vec![vec![0, 1, 2, 3, 4], vec![1, 0, 2, 3, 4]];
        assert_eq!(topk_accuracy(&perfect, &[0, 1], 1), 1.0);
        let third = vec![vec![1, 2, 0, 3, 4], vec![0, 2, 1, 3, 4]];
        assert_eq!(topk_accuracy(&third, &[0, 1], 1), 0.0);
        assert_eq!(topk_accuracy(&third, &[0, 1], 5), 1.0);
    }

    fn labelled(cats: &[Category]) -> (Vec<String>, HashMap<String, Category>) {
        let ids: Vec<String> = (0..cats.len()).map(|i| format!("img{i}")).collect();
        let map = ids.iter().cloned().zip(cats.iter().copied()).collect();
        (ids, map)
    }

    #[test]
    fn concept_accuracy_excludes_ground_truth() {
        use Category::*;
        let (ids, map) = labelled(&[Animals, Animals, Animals, Animals, Animals, Animals, Food]);
        // Ground truth retrieved first plus four same-category others.
        let r = vec![vec![0, 1, 2, 3, 4]];
        assert_eq!(concept_accuracy(&r, &[0], &ids, &map).unwrap(), 0.8);
        // All five same-category, none the ground truth.
        let r = vec![vec![1, 2, 3, 4, 5]];
        assert_eq!(concept_accuracy(&r, &[0], &ids, &map).unwrap(), 1.0);
    }

    #[test]
    fn concept_accuracy_two_queries() {
        use Category::*;
        let (ids, map) = labelled(&[Animals, Food, Animals, Food, Tools, Food]);
        let r = vec![vec![0, 1, 2, 3, 4], vec![3, 5, 1, 0, 2]];
        // q0 (animals): item 2 only -> 1. q1 (gt 1, food): 3, 5 -> 2.
        assert_eq!(concept_accuracy(&r, &[0, 1], &ids, &map).unwrap(), 3.0 / 10.0);
    }

    #[test]
    fn missing_category_is_an_error() {
        let (ids, mut map) = labelled(&[Category::Food; 5]);
        map.remove("img3");
        let r = vec![vec![0, 1, 2, 3, 4]];
        assert!(matches!(
            concept_accuracy(&r, &[0], &ids, &map),
            Err(Error::MissingCategory(id)) if id == "img3"
        ));
    }
}
