//! Distance-assisted two-stage multiple testing.
//!
//! Hypotheses are arranged in an aggregation tree built from ancillary
//! distances or an ordering. The screening stage walks the tree from the
//! leaves upward and flags nodes whose Stouffer statistic clears a layer
//! threshold chosen to bound the estimated false discovery proportion. The
//! refining stage then re-tests each member of a flagged node against its
//! own threshold, so poor ancillary information cannot inflate the false
//! discovery rate.
//!
//! ```
//! use dart2::{dart2, build_tree_from_ordering, Dart2Config, StatisticVector};
//!
//! let t = StatisticVector::new(vec![4.2, 3.9, 0.1, -0.4, 2.2, 2.4, 0.3, -1.0]).unwrap();
//! let tree = build_tree_from_ordering(&[1, 2, 3, 4, 5, 6, 7, 8], 2, 3).unwrap();
//! let report = dart2(&t, &tree, &Dart2Config::new(0.05).unwrap()).unwrap();
//! assert!(report.rejected().contains(&0));
//! ```

pub mod baselines;
pub mod error;
pub mod eval;
pub mod normal;
pub mod refine;
pub mod screen;
pub mod sim;
pub mod tree;
pub mod types;

pub use baselines::bh_procedure;
pub use error::{Error, Result};
pub use eval::{fdp, precision_f1, sensitivity, summarize, Accuracy, MetricSummary};
pub use normal::{std_normal_sf, std_normal_sf_inv};
pub use refine::{dart2, naive_threshold, refining_stage, robust_threshold, RobustThreshold};
pub use screen::{layer_alpha, layer_threshold, node_statistic, screening_stage, ScreeningResult};
pub use tree::{
    build_tree_from_distances, build_tree_from_ordering, max_layers, validate_tree,
    AggregationTree, DistanceMatrix, Node, Violation,
};
pub use types::{
    alpha_floor, pvalue_to_z, Dart2Config, LayerAlphaRule, PValueVector, Provenance, RefineMode,
    RefineRecord, RejectionReport, StatisticVector,
};
