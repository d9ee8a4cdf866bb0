//! Conditional anomaly detection with soft harmonic functions.
//!
//! An instance is a conditional anomaly when its label is unusual given its
//! features. The detector propagates labels over a ψ-weighted Gaussian k-NN
//! graph with a regularized soft harmonic solve and scores each instance by
//! how far its propagated label lies from the observed one. Large training
//! sets are first quantized to a backbone of k-means centroids.
//!
//! ```
//! use softhad::prelude::*;
//!
//! // Two tight groups; the last row carries the wrong label for its group.
//! let rows = vec![
//!     vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1], vec![0.1, 0.1],
//!     vec![3.0, 3.0], vec![3.1, 3.0], vec![3.0, 3.1], vec![3.1, 3.1],
//! ];
//! let labels = [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, -1.0];
//! let data = Dataset::past_only(
//!     FeatureMatrix::from_rows(&rows)?,
//!     labels.iter().map(|&y| Label::from_response(y)).collect(),
//! )?;
//! let psi = FeatureWeights::uniform(2);
//! let backbone = build_backbone(&data, &psi, &BackboneConfig { graph_k: 3, ..Default::default() }, 7)?;
//! let report = score_backbone(&backbone, &ScoringConfig { graph_k: 3, ..Default::default() })?;
//! assert_eq!(report.ranking()[0], 7);
//! # Ok::<(), softhad::Error>(())
//! ```

pub mod backbone;
pub mod baseline;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod harmonic;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/harmonic.md")]
    mod harmonic {}
    #[doc = include_str!("../../../book/src/backbone.md")]
    mod backbone {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

/// The types and functions most pipelines need.
pub mod prelude {
    pub use crate::backbone::{build_backbone, BackboneConfig, BackboneGraph};
    pub use crate::baseline::KnnModel;
    pub use crate::data::{inject_flips, wilcoxon_weights};
    pub use crate::data::{load_csv, CsvOptions, Dataset, FeatureMatrix, FeatureWeights, Label, LabelRule};
    pub use crate::error::{Error, Result};
    pub use crate::eval::{flip_detection_auc, run_experiment, score_concordance, ExperimentSpec};
    pub use crate::graph::{build_knn_graph, choose_sigma, SigmaMode, SigmaRule, SimilarityGraph};
    pub use crate::harmonic::{
        score_backbone, score_recent, solve_soft_harmonic, AnomalyReport, HarmonicConfig, ScoringConfig, ScoringMode,
    };
}
