//! Permutation importance under multiclass log-loss.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::sub_rng;
use crate::schema::N_FEATURES;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const PROB_FLOOR: f64 = 1e-15;

/// Per-feature mean increase in log-loss over `repeats` independent
/// column permutations, with ranks 1..N (1 = largest increase).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub mean_loss_increase: [f64; N_FEATURES],
    pub ranks: [usize; N_FEATURES],
    pub baseline_loss: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl ImportanceReport {
    /// Features ordered rank 1 first.
    pub fn ordered_by_rank(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..N_FEATURES).collect();
        order.sort_by_key(|&f| self.ranks[f]);
        order
    }

    pub fn top_k(&self, k: usize) -> Vec<usize> {
        self.ordered_by_rank().into_iter().take(k).collect()
    }

    pub fn rank_of(&self, feature: usize) -> usize {
        self.ranks[feature]
    }
}

fn log_loss<M: Model + ?Sized>(model: &M, table: &FaultTable) -> f64 {
    let terms: Vec<f64> = table
        .rows
        .par_iter()
        .zip(&table.labels)
        .map(|(row, label)| -model.predict_proba(row)[label.index()].max(PROB_FLOOR).ln())
        .collect();
    terms.iter().sum::<f64>() / terms.len() as f64
}

fn permuted_loss<M: Model + ?Sized>(
    model: &M,
    table: &FaultTable,
    feature: usize,
    perm: &[u32],
) -> f64 {
    let terms: Vec<f64> = table
        .rows
        .par_iter()
        .enumerate()
        .zip(&table.labels)
        .map(|((i, row), label)| {
            let mut r = *row;
            r[feature] = table.rows[perm[i] as usize][feature];
            -model.predict_proba(&r)[label.index()].max(PROB_FLOOR).ln()
        })
        .collect();
    terms.iter().sum::<f64>() / terms.len() as f64
}

/// Averages `loss(permuted) - loss(baseline)` over `repeats` independent
/// within-column permutations per feature. Ranks are assigned by
/// descending mean increase; ties resolve by schema order.
pub fn permutation_importance<M: Model + ?Sized>(
    model: &M,
    table: &FaultTable,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if repeats < 1 {
        return Err(Error::InvalidParam("importance repeats must be >= 1".into()));
    }
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let baseline_loss = log_loss(model, table);
    let n = table.len();
    let deltas: Vec<f64> = (0..N_FEATURES)
        .into_par_iter()
        .map(|feature| {
            let mut acc = 0.0;
            for r in 0..repeats {
                let mut rng = sub_rng(seed, "importance", (feature * repeats + r) as u64);
                let mut perm: Vec<u32> = (0..n as u32).collect();
                perm.shuffle(&mut rng);
                acc += permuted_loss(model, table, feature, &perm) - baseline_loss;
            }
            acc / repeats as f64
        })
        .collect();
    let mut mean_loss_increase = [0.0; N_FEATURES];
    mean_loss_increase.copy_from_slice(&deltas);
    let mut order: Vec<usize> = (0..N_FEATURES).collect();
    order.sort_by(|&a, &b| {
        mean_loss_increase[b]
            .total_cmp(&mean_loss_increase[a])
            .then(a.cmp(&b))
    });
    let mut ranks = [0; N_FEATURES];
    for (pos, &f) in order.iter().enumerate() {
        ranks[f] = pos + 1;
    }
    Ok(ImportanceReport {
        mean_loss_increase,
        ranks,
        baseline_loss,
        repeats,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FaultLabel, Row, N_CLASSES};

    struct StumpOnFeature {
        feature: usize,
        threshold: f64,
    }

    impl Model for StumpOnFeature {
        fn predict_into(&self, row: &Row, out: &mut [f64; N_CLASSES]) {
            out.fill(0.0);
            if row[self.feature] <= self.threshold {
                out[0] = 1.0;
            } else {
                out[1] = 1.0;
            }
        }
    }

    fn toy_table(n: usize) -> FaultTable {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let mut r = [0.0; N_FEATURES];
            r[2] = i as f64;
            r[7] = (i * 31 % 17) as f64;
            rows.push(r);
            labels.push(if i < n / 2 { FaultLabel::ALL[0] } else { FaultLabel::ALL[1] });
        }
        FaultTable { rows, labels }
    }

    #[test]
    fn unread_feature_scores_exactly_zero() {
        let t = toy_table(40);
        let model = StumpOnFeature { feature: 2, threshold: 19.5 };
        let report = permutation_importance(&model, &t, 3, 5).unwrap();
        assert_eq!(report.mean_loss_increase[7], 0.0);
        assert!(report.mean_loss_increase[2] > 0.0);
        assert_eq!(report.ranks[2], 1);
    }

    #[test]
    fn ranks_are_a_permutation() {
        let t = toy_table(30);
        let model = StumpOnFeature { feature: 2, threshold: 14.5 };
        let report = permutation_importance(&model, &t, 2, 0).unwrap();
        let mut seen = report.ranks.to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (1..=N_FEATURES).collect::<Vec<_>>());
        assert_eq!(report.ordered_by_rank()[0], 2);
        assert_eq!(report.top_k(1), vec![2]);
    }

    #[test]
    fn same_seed_identical_report() {
        let t = toy_table(25);
        let model = StumpOnFeature { feature: 2, threshold: 12.0 };
        let a = permutation_importance(&model, &t, 4, 9).unwrap();
        let b = permutation_importance(&model, &t, 4, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ties_resolve_by_schema_order() {
        let t = toy_table(20);
        struct Constant;
        impl Model for Constant {
            fn predict_into(&self, _row: &Row, out: &mut [f64; N_CLASSES]) {
                *out = [1.0 / N_CLASSES as f64; N_CLASSES];
            }
        }
        let report = permutation_importance(&Constant, &t, 2, 1).unwrap();
        for f in 0..N_FEATURES {
            assert_eq!(report.ranks[f], f + 1);
        }
    }

    #[test]
    fn zero_repeats_rejected() {
        let t = toy_table(10);
        let model = StumpOnFeature { feature: 2, threshold: 4.5 };
        assert!(matches!(
            permutation_importance(&model, &t, 0, 0),
            Err(Error::InvalidParam(_))
        ));
    }
}
