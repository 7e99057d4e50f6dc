//! Unsupervised feature selection driven by multi-step Markov transition
//! probabilities over a kNN graph.
//!
//! The pipeline characterizes data structure with min/max multi-step
//! transition probabilities, fits a row-sparse projection to the resulting
//! structure templates with an iteratively reweighted least-squares solver,
//! and ranks features by the projection's row norms. A clustering harness
//! (seeded k-means, assignment-matched accuracy, normalized mutual
//! information) evaluates selected subsets.

pub mod data;
pub mod error;
pub mod eval;
mod linalg;
pub mod markov;
pub mod select;
pub mod solver;
pub mod synthetic;

pub use data::{load_csv, standardize, DataMatrix, LabeledDataset, Orientation, Standardize};
pub use error::{Error, Result};
pub use eval::{
    benchmark_sweep, evaluate_subset, hungarian_acc, kmeans, nmi, ClusteringRun, EvalReport,
    NmiNormalization, SubsetStats,
};
pub use markov::{
    build_template, knn_mask, max_reachability, min_reachability, multi_step_transitions,
    one_step_transition, pairwise_distances, reachability_pair, row_normalize, Denominator,
    DistanceMatrix, NeighborGraph, ReachabilityMatrix, ReachabilityVariant, Template,
    TransitionMatrix,
};
pub use select::{
    feature_scores, select_inter, select_max_p, select_min_p, PipelineParams, SelectionResult,
    Variant,
};
pub use solver::{
    objective, solve_irls, update_q, update_w, Penalty, SolverConfig, SolverState,
};
