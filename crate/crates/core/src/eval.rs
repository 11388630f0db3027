//! Stratified cross-validation, confusion matrices, and the
//! learner-by-dataset benchmark grid.

use crate::balance::{balance, BalanceConfig, Strategy};
use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestParams};
use crate::knn::KnnModel;
use crate::model::Model;
use crate::rng::{stage_rng, sub_rng};
use crate::schema::{FaultLabel, N_CLASSES};
use crate::tree::{train_tree, TreeParams};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A stratified partition of row indices into folds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    /// Stratified folds: within each class, rows are shuffled and dealt
    /// round-robin, so per-class counts across folds differ by at most one.
    pub fn stratified(labels: &[FaultLabel], n_folds: usize, seed: u64) -> Result<Self> {
        if n_folds < 2 {
            return Err(Error::InvalidParam("n_folds must be >= 2".into()));
        }
        let mut per_class: [Vec<usize>; N_CLASSES] = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            per_class[l.index()].push(i);
        }
        for (c, rows) in per_class.iter().enumerate() {
            if !rows.is_empty() && rows.len() < n_folds {
                return Err(Error::ClassTooSmall {
                    label: FaultLabel::ALL[c].name().into(),
                    n: rows.len(),
                    needed: n_folds,
                });
            }
        }
        let mut folds = vec![Vec::new(); n_folds];
        let mut rng = stage_rng(seed, "fold-plan");
        for rows in per_class.iter_mut() {
            rows.shuffle(&mut rng);
            for (j, &i) in rows.iter().enumerate() {
                folds[j % n_folds].push(i);
            }
        }
        for fold in &mut folds {
            fold.sort_unstable();
        }
        Ok(FoldPlan { n_folds, folds, seed })
    }

    /// Training indices for a fold: everything outside it, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// 7x7 count matrix; rows are true classes, columns predictions, both in
/// report order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u32; N_CLASSES]; N_CLASSES],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: FaultLabel, predicted: FaultLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().map(|&c| c as u64).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N_CLASSES).map(|i| self.counts[i][i] as u64).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Per-class error, 1 - recall; NaN-free (empty classes report 0).
    pub fn per_class_error(&self) -> [f64; N_CLASSES] {
        let mut out = [0.0; N_CLASSES];
        for c in 0..N_CLASSES {
            let row_total: u64 = self.counts[c].iter().map(|&v| v as u64).sum();
            if row_total > 0 {
                out[c] = 1.0 - self.counts[c][c] as f64 / row_total as f64;
            }
        }
        out
    }

    /// CSV with class names on both axes.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for l in FaultLabel::ALL {
            s.push(',');
            s.push_str(l.name());
        }
        s.push('\n');
        for (c, row) in self.counts.iter().enumerate() {
            s.push_str(FaultLabel::ALL[c].name());
            for v in row {
                s.push(',');
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        s
    }
}

/// Which learner a harness cell trains.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum LearnerSpec {
    Forest(ForestParams),
    Tree { params: TreeParams, seed: u64 },
    Knn { k: usize },
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Forest(_) => "forest",
            LearnerSpec::Tree { .. } => "tree",
            LearnerSpec::Knn { .. } => "knn",
        }
    }

    /// Re-seeds stochastic learners for an independent fold.
    fn for_fold(&self, fold: usize) -> LearnerSpec {
        match self {
            LearnerSpec::Forest(p) => {
                let mut p = *p;
                p.seed = sub_rng(p.seed, "cv-fold", fold as u64).random();
                LearnerSpec::Forest(p)
            }
            other => other.clone(),
        }
    }

    pub fn train(&self, table: &FaultTable) -> Result<Box<dyn Model + Send>> {
        match self {
            LearnerSpec::Forest(p) => Ok(Box::new(train_forest(table, p)?)),
            LearnerSpec::Tree { params, seed } => {
                let mut rng = stage_rng(*seed, "tree-learner");
                Ok(Box::new(train_tree(table, params, &mut rng)?))
            }
            LearnerSpec::Knn { k } => Ok(Box::new(KnnModel::fit(table, *k)?)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class_error: [f64; N_CLASSES],
}

/// Trains on the complement of each fold and scores its held-out rows; the
/// confusion matrix accumulates over all held-out predictions.
pub fn cross_validate(table: &FaultTable, spec: &LearnerSpec, plan: &FoldPlan) -> Result<CvReport> {
    let per_fold: Vec<Result<ConfusionMatrix>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(fold, test_idx)| {
            let train = table.subset(&plan.train_indices(fold));
            let model = spec.for_fold(fold).train(&train)?;
            let mut cm = ConfusionMatrix::default();
            for &i in test_idx {
                cm.record(table.labels[i], model.predict(&table.rows[i]));
            }
            Ok(cm)
        })
        .collect();
    let mut confusion = ConfusionMatrix::default();
    for cm in per_fold {
        confusion.merge(&cm?);
    }
    Ok(CvReport {
        accuracy: confusion.accuracy(),
        per_class_error: confusion.per_class_error(),
        confusion,
    })
}

/// As `cross_validate`, but each fold's training portion is rebalanced with
/// `cfg` before training while held-out rows stay untouched. This is the
/// stricter alternative to balancing the whole dataset before making folds.
pub fn cross_validate_balanced_within(
    table: &FaultTable,
    spec: &LearnerSpec,
    plan: &FoldPlan,
    cfg: &BalanceConfig,
) -> Result<CvReport> {
    let per_fold: Vec<Result<ConfusionMatrix>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(fold, test_idx)| {
            let train_raw = table.subset(&plan.train_indices(fold));
            let mut fold_cfg = *cfg;
            fold_cfg.seed = sub_rng(cfg.seed, "fold-balance", fold as u64).random();
            let balanced = balance(&train_raw, &fold_cfg)?;
            let model = spec.for_fold(fold).train(&balanced.table)?;
            let mut cm = ConfusionMatrix::default();
            for &i in test_idx {
                cm.record(table.labels[i], model.predict(&table.rows[i]));
            }
            Ok(cm)
        })
        .collect();
    let mut confusion = ConfusionMatrix::default();
    for cm in per_fold {
        confusion.merge(&cm?);
    }
    Ok(CvReport {
        accuracy: confusion.accuracy(),
        per_class_error: confusion.per_class_error(),
        confusion,
    })
}

/// Dataset axis of the benchmark grid, in fixed order.
pub const BENCH_DATASETS: [&str; 4] = ["original", "undersample", "oversample", "smote"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkGrid {
    pub datasets: Vec<String>,
    pub learners: Vec<String>,
    /// accuracy[learner][dataset]
    pub accuracy: Vec<Vec<f64>>,
    /// confusion[learner][dataset], accumulated over held-out folds
    pub confusion: Vec<Vec<ConfusionMatrix>>,
    pub seed: u64,
    pub balance_within_folds: bool,
}

impl BenchmarkGrid {
    pub fn cell(&self, learner: &str, dataset: &str) -> Option<f64> {
        let li = self.learners.iter().position(|l| l == learner)?;
        let di = self.datasets.iter().position(|d| d == dataset)?;
        Some(self.accuracy[li][di])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("learner");
        for d in &self.datasets {
            s.push(',');
            s.push_str(d);
        }
        s.push('\n');
        for (l, row) in self.learners.iter().zip(&self.accuracy) {
            s.push_str(l);
            for v in row {
                s.push_str(&format!(",{v:.4}"));
            }
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for BenchmarkGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_csv())
    }
}

/// Runs every learner on the original table and its three balanced
/// variants under a shared fold-plan seed. With `balance_within_folds`,
/// folds are made on the original table and each fold's training part is
/// balanced separately; otherwise balancing precedes fold assignment,
/// mirroring the published flow (synthetic rows may then share parents
/// across folds, a documented leakage caveat of that flow).
pub fn benchmark(
    table: &FaultTable,
    learners: &[LearnerSpec],
    seed: u64,
    smote_k: usize,
    balance_within_folds: bool,
) -> Result<BenchmarkGrid> {
    let strategies = [
        Strategy::None,
        Strategy::Undersample,
        Strategy::Oversample,
        Strategy::Smote,
    ];
    let mut accuracy = vec![Vec::with_capacity(strategies.len()); learners.len()];
    let mut confusion = vec![Vec::with_capacity(strategies.len()); learners.len()];
    for (d, &strategy) in strategies.iter().enumerate() {
        let mut cfg = BalanceConfig::new(strategy, sub_rng(seed, "bench-balance", d as u64).random());
        cfg.k_neighbors = smote_k;
        if balance_within_folds {
            let plan = FoldPlan::stratified(&table.labels, 10, seed)?;
            for (l, spec) in learners.iter().enumerate() {
                let report = if strategy == Strategy::None {
                    cross_validate(table, spec, &plan)?
                } else {
                    cross_validate_balanced_within(table, spec, &plan, &cfg)?
                };
                accuracy[l].push(report.accuracy);
                confusion[l].push(report.confusion);
            }
        } else {
            let balanced = balance(table, &cfg)?;
            let plan = FoldPlan::stratified(&balanced.table.labels, 10, seed)?;
            for (l, spec) in learners.iter().enumerate() {
                let report = cross_validate(&balanced.table, spec, &plan)?;
                accuracy[l].push(report.accuracy);
                confusion[l].push(report.confusion);
            }
        }
    }
    Ok(BenchmarkGrid {
        datasets: BENCH_DATASETS.iter().map(|s| s.to_string()).collect(),
        learners: learners.iter().map(|l| l.name().to_string()).collect(),
        accuracy,
        confusion,
        seed,
        balance_within_folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::N_FEATURES;

    fn balanced_table(per_class: usize) -> FaultTable {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &label) in FaultLabel::ALL.iter().enumerate() {
            for i in 0..per_class {
                let mut r = [0.0; N_FEATURES];
                r[0] = c as f64 * 5.0 + (i % 2) as f64 * 0.25;
                r[3] = i as f64;
                rows.push(r);
                labels.push(label);
            }
        }
        FaultTable { rows, labels }
    }

    #[test]
    fn ten_per_class_gives_one_each_per_fold() {
        let t = balanced_table(10);
        let plan = FoldPlan::stratified(&t.labels, 10, 0).unwrap();
        for fold in &plan.folds {
            assert_eq!(fold.len(), N_CLASSES);
            let mut seen = [0; N_CLASSES];
            for &i in fold {
                seen[t.labels[i].index()] += 1;
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn stratification_spread_at_most_one() {
        let t = balanced_table(13);
        let plan = FoldPlan::stratified(&t.labels, 10, 7).unwrap();
        for c in 0..N_CLASSES {
            let counts: Vec<usize> = plan
                .folds
                .iter()
                .map(|f| f.iter().filter(|&&i| t.labels[i].index() == c).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1);
        }
        let total: usize = plan.folds.iter().map(Vec::len).sum();
        assert_eq!(total, t.len());
    }

    #[test]
    fn small_class_rejected() {
        let mut t = balanced_table(10);
        t.rows.truncate(65);
        t.labels.truncate(65);
        match FoldPlan::stratified(&t.labels, 10, 0) {
            Err(Error::ClassTooSmall { label, n: 5, needed: 10 }) => {
                assert_eq!(label, "Z_Scratch");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn confusion_accuracy_is_trace_over_total() {
        let mut cm = ConfusionMatrix::default();
        cm.record(FaultLabel::Bumps, FaultLabel::Bumps);
        cm.record(FaultLabel::Bumps, FaultLabel::Stains);
        cm.record(FaultLabel::Stains, FaultLabel::Stains);
        cm.record(FaultLabel::Stains, FaultLabel::Stains);
        assert_eq!(cm.total(), 4);
        assert_eq!(cm.trace(), 3);
        assert_eq!(cm.accuracy(), 0.75);
        let err = cm.per_class_error();
        assert_eq!(err[FaultLabel::Bumps.index()], 0.5);
        assert_eq!(err[FaultLabel::Stains.index()], 0.0);
    }

    /// A learner that always predicts the same class scores exactly 1/7 on
    /// a balanced table.
    struct ConstantModel;
    impl Model for ConstantModel {
        fn predict_into(&self, _row: &crate::schema::Row, out: &mut [f64; N_CLASSES]) {
            out.fill(0.0);
            out[0] = 1.0;
        }
    }

    #[test]
    fn constant_learner_scores_one_seventh() {
        let t = balanced_table(10);
        let plan = FoldPlan::stratified(&t.labels, 10, 3).unwrap();
        let model = ConstantModel;
        let mut cm = ConfusionMatrix::default();
        for fold in &plan.folds {
            for &i in fold {
                cm.record(t.labels[i], model.predict(&t.rows[i]));
            }
        }
        assert!((cm.accuracy() - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn cross_validate_separable_data() {
        let t = balanced_table(10);
        let spec = LearnerSpec::Knn { k: 1 };
        let plan = FoldPlan::stratified(&t.labels, 10, 1).unwrap();
        let report = cross_validate(&t, &spec, &plan).unwrap();
        assert!(report.accuracy > 0.9, "accuracy {}", report.accuracy);
        assert_eq!(report.accuracy, report.confusion.accuracy());
    }

    #[test]
    fn benchmark_same_seed_identical_grid() {
        let t = balanced_table(12);
        let learners = vec![LearnerSpec::Knn { k: 1 }];
        let a = benchmark(&t, &learners, 11, 2, false).unwrap();
        let b = benchmark(&t, &learners, 11, 2, false).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.cell("knn", "original"), Some(a.accuracy[0][0]));
    }
}
