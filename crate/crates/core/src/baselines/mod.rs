//! Reference detectors: local outlier factor and isolation forest.
//!
//! Both return one score per row, higher meaning more anomalous, so they plug
//! into the same evaluation and tuning code as the main pipeline.

mod iforest;
mod lof;

pub use iforest::{average_path_length, iforest_scores, IforestConfig, IsolationForest};
pub use lof::{lof_scores, LofConfig};
