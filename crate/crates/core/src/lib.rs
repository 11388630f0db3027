//! Steel-plate surface fault diagnosis with built-in interpretability.
//!
//! The crate covers the full modelling path for the seven-class
//! steel-plates fault dataset: ingestion and cleaning, class balancing
//! (undersampling, oversampling, multiclass SMOTE), decision tree,
//! random forest, and k-nearest-neighbour learners built from scratch,
//! stratified cross-validation and benchmarking, per-class medoid
//! prototypes, model-agnostic explanations (permutation importance,
//! correlation filtering, ceteris-paribus and partial-dependence
//! profiles, additive breakdowns), IF-THEN rule extraction from forests
//! and from association mining, and a rule-table classifier with a
//! forest fallback.
//!
//! Every random stage derives its stream from a master seed, so any
//! pipeline built on the crate reproduces bit-identical artifacts.

pub mod balance;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod explain;
pub mod forest;
pub mod knn;
pub mod medoids;
pub mod model;
pub mod rng;
pub mod rules;
pub mod schema;
pub mod tree;
pub mod tune;

pub use balance::{balance, BalanceConfig, BalancedTable, Strategy};
pub use data::{FaultTable, Format};
pub use ensemble::{
    compile_manual, compile_rule_table, evaluate_ensemble, predict_all as predict_all_ensemble,
    CompiledRule, Decision, EnsembleModel, EnsembleReport, FireCounts, ManualRule, ManualSlot,
    MiningConfig, Provenance, RuleTable,
};
pub use error::{Error, Result};
pub use eval::{
    benchmark, cross_validate, cross_validate_balanced_within, BenchmarkGrid, ConfusionMatrix,
    CvReport, FoldPlan, LearnerSpec, BENCH_DATASETS,
};
pub use forest::{load_model, save_model, train_forest, ForestModel, ForestParams};
pub use knn::KnnModel;
pub use medoids::{compute_medoids, medoids_json, scale_for_radar, Medoid};
pub use model::Model;
pub use schema::{
    argmax_class, feature_index, ClassCounts, FaultLabel, Row, Steel, FEATURE_NAMES, N_CLASSES,
    N_FEATURES, STEEL_FEATURE,
};
pub use tree::{train_tree, TreeModel, TreeParams};
pub use tune::{tune_forest, tune_knn, ForestGrid, TuneOutcome};
