use serde::{Deserialize, Serialize};

use super::RegressionResult;
use crate::error::{Error, Result};

/// Retrieval metrics for one subject against one backbone layer. All
/// accuracies are fractions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub subject_id: String,
    pub backbone: String,
    pub layer_index: usize,
    pub num_layers: usize,
    pub relative_depth: f64,
    pub top1: f64,
    pub top5: f64,
    pub concept_accuracy: f64,
    pub num_queries: usize,
}

/// Per-layer reports plus the best-versus-final summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by layer index.
    pub reports: Vec<RetrievalReport>,
    pub best_layer: usize,
    pub best_top1: f64,
    pub final_layer: usize,
    pub final_top1: f64,
    /// `best_top1 − final_top1`.
    pub delta: f64,
}

impl SweepResult {
    /// Best layer is the highest Top-1 (earliest layer on ties); the final
    /// layer is the deepest one probed.
    pub fn from_reports(mut reports: Vec<RetrievalReport>) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::InvalidArgument("sweep has no layer reports".into()));
        }
        reports.sort_by_key(|r| r.layer_index);
        if reports.windows(2).any(|w| w[0].layer_index == w[1].layer_index) {
            return Err(Error::InvalidArgument("duplicate layer index in sweep".into()));
        }
        let mut best = &reports[0];
        for r in &reports[1..] {
            if r.top1 > best.top1 {
                best = r;
            }
        }
        let last = reports.last().expect("non-empty");
        let (best_layer, best_top1) = (best.layer_index, best.top1);
        let (final_layer, final_top1) = (last.layer_index, last.top1);
        Ok(Self {
            best_layer,
            best_top1,
            final_layer,
            final_top1,
            delta: best_top1 - final_top1,
            reports,
        })
    }
}

/// Top-level report document: any subset of per-layer records, a sweep
/// summary and a regression block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<RetrievalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionBlock {
    pub best: RegressionResult,
    #[serde(rename = "final")]
    pub final_output: RegressionResult,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(layer: usize, top1: f64) -> RetrievalReport {
        RetrievalReport {
            subject_id: "sub-01".into(),
            backbone: "toy".into(),
            layer_index: layer,
            num_layers: 4,
            relative_depth: (layer - 1) as f64 / 3.0,
            top1,
            top5: top1,
            concept_accuracy: 0.0,
            num_queries: 10,
        }
    }

    #[test]
    fn best_final_and_delta() {
        let s = SweepResult::from_reports(vec![report(4, 0.403), report(1, 0.2), report(3, 0.677), report(2, 0.5)]).unwrap();
        assert_eq!(s.reports.iter().map(|r| r.layer_index).collect::<Vec<_>>(), [1, 2, 3, 4]);
        assert_eq!((s.best_layer, s.final_layer), (3, 4));
        assert_eq!(format!("{:+.1}", 100.0 * s.delta), "+27.4");
    }

    #[test]
    fn single_layer_and_ties() {
        let s = SweepResult::from_reports(vec![report(2, 0.3)]).unwrap();
        assert_eq!((s.best_layer, s.final_layer, s.delta), (2, 2, 0.0));
        let s = SweepResult::from_reports(vec![report(3, 0.5), report(2, 0.5), report(4, 0.1)]).unwrap();
        assert_eq!(s.best_layer, 2);
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        assert!(SweepResult::from_reports(vec![]).is_err());
        assert!(SweepResult::from_reports(vec![report(2, 0.1), report(2, 0.2)]).is_err());
    }
}
