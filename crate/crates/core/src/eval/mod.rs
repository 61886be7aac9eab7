//! Retrieval metrics, layer sweeps, summary tables and scaling regression.

mod depth;
mod export;
mod regression;
mod report;
mod retrieval;
mod sweep;
mod table;

pub use depth::relative_depth;
pub use export::{export_embeddings, write_embeddings_csv};
pub use regression::{linear_regression, scaling_regression, student_t_two_sided, RegressionResult};
pub use report::{RegressionBlock, ReportDocument, RetrievalReport, SweepResult};
pub use retrieval::{concept_accuracy, cosine_similarity, retrieve_topk, topk_accuracy};
pub use sweep::{evaluate, layer_seed, layer_sweep, layer_sweep_threads};
pub use table::{format_delta, format_percent, parse_param_count, read_table, regress_table, write_table, TableRow};
