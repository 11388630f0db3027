//! Class balancing: undersampling, oversampling, and multiclass SMOTE.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::rng::sub_rng;
use crate::schema::{FaultLabel, Row, N_CLASSES, N_FEATURES, STEEL_FEATURE};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Balancing strategy of `BalanceConfig`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    None,
    Undersample,
    Oversample,
    Smote,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "under" | "undersample" => Ok(Strategy::Undersample),
            "over" | "oversample" => Ok(Strategy::Oversample),
            "smote" => Ok(Strategy::Smote),
            other => Err(Error::InvalidParam(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BalanceConfig {
    pub strategy: Strategy,
    /// SMOTE neighborhood size.
    pub k_neighbors: usize,
    pub seed: u64,
}

impl BalanceConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        BalanceConfig { strategy, k_neighbors: 5, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(Error::InvalidParam("k_neighbors must be >= 1".into()));
        }
        Ok(())
    }
}

/// Origin tag of a balanced row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Duplicated,
    Synthetic,
}

/// A balanced dataset with per-row origin tags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalancedTable {
    pub table: FaultTable,
    pub provenance: Vec<Provenance>,
}

/// Applies the configured strategy.
pub fn balance(table: &FaultTable, config: &BalanceConfig) -> Result<BalancedTable> {
    config.validate()?;
    match config.strategy {
        Strategy::None => Ok(BalancedTable {
            table: table.clone(),
            provenance: vec![Provenance::Original; table.len()],
        }),
        Strategy::Undersample => undersample(table, config),
        Strategy::Oversample => oversample(table, config),
        Strategy::Smote => smote_multiclass(table, config),
    }
}

fn class_indices(table: &FaultTable) -> [Vec<usize>; N_CLASSES] {
    let mut idx: [Vec<usize>; N_CLASSES] = Default::default();
    for (i, &l) in table.labels.iter().enumerate() {
        idx[l.index()].push(i);
    }
    idx
}

fn nonempty_min_max(idx: &[Vec<usize>; N_CLASSES]) -> Result<(usize, usize)> {
    let sizes: Vec<usize> = idx.iter().map(Vec::len).collect();
    if sizes.iter().all(|&s| s == 0) {
        return Err(Error::EmptyTable);
    }
    let min = sizes.iter().copied().filter(|&s| s > 0).min().unwrap();
    let max = sizes.iter().copied().max().unwrap();
    Ok((min, max))
}

/// Downsamples every class, without replacement, to the minority count.
pub fn undersample(table: &FaultTable, config: &BalanceConfig) -> Result<BalancedTable> {
    let idx = class_indices(table);
    let (target, _) = nonempty_min_max(&idx)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, class_idx) in idx.iter().enumerate() {
        if class_idx.is_empty() {
            continue;
        }
        let mut pool = class_idx.clone();
        let mut rng = sub_rng(config.seed, "undersample", c as u64);
        pool.shuffle(&mut rng);
        let mut chosen: Vec<usize> = pool[..target].to_vec();
        chosen.sort_unstable();
        for i in chosen {
            rows.push(table.rows[i]);
            labels.push(table.labels[i]);
        }
    }
    let n = rows.len();
    Ok(BalancedTable {
        table: FaultTable { rows, labels },
        provenance: vec![Provenance::Original; n],
    })
}

/// Upsamples every minority class to the majority count by sampling its own
/// rows uniformly with replacement.
pub fn oversample(table: &FaultTable, config: &BalanceConfig) -> Result<BalancedTable> {
    let idx = class_indices(table);
    let (_, target) = nonempty_min_max(&idx)?;
    let mut rows = table.rows.clone();
    let mut labels = table.labels.clone();
    let mut provenance = vec![Provenance::Original; table.len()];
    for (c, class_idx) in idx.iter().enumerate() {
        if class_idx.is_empty() {
            continue;
        }
        let mut rng = sub_rng(config.seed, "oversample", c as u64);
        for _ in class_idx.len()..target {
            let pick = class_idx[rng.random_range(0..class_idx.len())];
            rows.push(table.rows[pick]);
            labels.push(table.labels[pick]);
            provenance.push(Provenance::Duplicated);
        }
    }
    Ok(BalancedTable { table: FaultTable { rows, labels }, provenance })
}

/// Grows every minority class to the majority count with synthetic rows on
/// the segment between a class member and one of its k nearest same-class
/// neighbors. Neighbor search runs on per-class z-scored numeric features;
/// synthetic rows are emitted in original units with TypeOfSteel copied
/// from the seed row.
pub fn smote_multiclass(table: &FaultTable, config: &BalanceConfig) -> Result<BalancedTable> {
    let idx = class_indices(table);
    let (_, target) = nonempty_min_max(&idx)?;
    let k = config.k_neighbors;
    for (c, class_idx) in idx.iter().enumerate() {
        let n = class_idx.len();
        if n == 0 || n == target {
            continue;
        }
        if n < 2 {
            return Err(Error::ClassTooSmall {
                label: FaultLabel::ALL[c].name().into(),
                n,
                needed: 2,
            });
        }
        if k >= n {
            return Err(Error::KOutOfRange { k, max: n });
        }
    }

    let per_class: Vec<(usize, Vec<(Row, FaultLabel)>)> = idx
        .par_iter()
        .enumerate()
        .filter(|(_, ci)| !ci.is_empty() && ci.len() < target)
        .map(|(c, class_idx)| {
            let rows: Vec<&Row> = class_idx.iter().map(|&i| &table.rows[i]).collect();
            let label = FaultLabel::ALL[c];
            let need = target - rows.len();
            let neighbors = knn_within_class(&rows, k);
            let mut rng = sub_rng(config.seed, "smote", c as u64);
            let mut synth = Vec::with_capacity(need);
            for _ in 0..need {
                let i = rng.random_range(0..rows.len());
                let j = neighbors[i][rng.random_range(0..k)];
                let lambda: f64 = rng.random();
                let (x, y) = (rows[i], rows[j]);
                let mut s = *x;
                for f in 0..N_FEATURES {
                    if f != STEEL_FEATURE {
                        let (lo, hi) = (x[f].min(y[f]), x[f].max(y[f]));
                        s[f] = (x[f] + lambda * (y[f] - x[f])).clamp(lo, hi);
                    }
                }
                synth.push((s, label));
            }
            (c, synth)
        })
        .collect();

    let mut rows = table.rows.clone();
    let mut labels = table.labels.clone();
    let mut provenance = vec![Provenance::Original; table.len()];
    let mut by_class: Vec<_> = per_class;
    by_class.sort_by_key(|(c, _)| *c);
    for (_, synth) in by_class {
        for (row, label) in synth {
            rows.push(row);
            labels.push(label);
            provenance.push(Provenance::Synthetic);
        }
    }
    Ok(BalancedTable { table: FaultTable { rows, labels }, provenance })
}

/// For each class row, the indices (within the class) of its k nearest
/// neighbors under Euclidean distance on z-scored numeric features.
/// Distance ties resolve to the lower index.
fn knn_within_class(rows: &[&Row], k: usize) -> Vec<Vec<usize>> {
    let n = rows.len();
    let mut mean = [0.0; N_FEATURES];
    let mut sd = [0.0; N_FEATURES];
    for f in 0..N_FEATURES {
        let m = rows.iter().map(|r| r[f]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[f] - m).powi(2)).sum::<f64>() / n as f64;
        mean[f] = m;
        sd[f] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            (0..N_FEATURES)
                .filter(|&f| f != STEEL_FEATURE)
                .map(|f| (r[f] - mean[f]) / sd[f])
                .collect()
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut dist: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i]
                        .iter()
                        .zip(&z[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    (d, j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist[..k].iter().map(|&(_, j)| j).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_table(counts: &[(FaultLabel, usize)]) -> FaultTable {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut v = 0.0;
        for &(label, n) in counts {
            for _ in 0..n {
                let mut row = [0.0; N_FEATURES];
                row[0] = v;
                row[5] = 2.0 * v;
                v += 1.0;
                rows.push(row);
                labels.push(label);
            }
        }
        FaultTable { rows, labels }
    }

    #[test]
    fn undersample_two_classes() {
        let t = tiny_table(&[(FaultLabel::Bumps, 4), (FaultLabel::Stains, 2)]);
        let b = undersample(&t, &BalanceConfig::new(Strategy::Undersample, 1)).unwrap();
        assert_eq!(b.table.len(), 4);
        let counts = b.table.class_counts().unwrap();
        assert_eq!(counts[FaultLabel::Bumps.index()], 2);
        assert_eq!(counts[FaultLabel::Stains.index()], 2);
        assert!(b.provenance.iter().all(|&p| p == Provenance::Original));
    }

    #[test]
    fn oversample_copies_single_row() {
        let t = tiny_table(&[(FaultLabel::Bumps, 1), (FaultLabel::Stains, 3)]);
        let b = oversample(&t, &BalanceConfig::new(Strategy::Oversample, 1)).unwrap();
        assert_eq!(b.table.len(), 6);
        let bumps: Vec<_> = b
            .table
            .rows
            .iter()
            .zip(&b.table.labels)
            .filter(|(_, &l)| l == FaultLabel::Bumps)
            .map(|(r, _)| r)
            .collect();
        assert_eq!(bumps.len(), 3);
        assert!(bumps.iter().all(|r| **r == t.rows[0]));
        assert_eq!(
            b.provenance.iter().filter(|&&p| p == Provenance::Duplicated).count(),
            2
        );
    }

    #[test]
    fn oversample_balanced_input_unchanged() {
        let t = tiny_table(&[(FaultLabel::Bumps, 3), (FaultLabel::Stains, 3)]);
        let b = oversample(&t, &BalanceConfig::new(Strategy::Oversample, 1)).unwrap();
        assert_eq!(b.table, t);
    }

    #[test]
    fn smote_identical_pair_reproduces_the_row() {
        let mut t = tiny_table(&[(FaultLabel::Bumps, 5)]);
        let row = [3.25; N_FEATURES];
        t.rows.push(row);
        t.rows.push(row);
        t.labels.push(FaultLabel::Stains);
        t.labels.push(FaultLabel::Stains);
        let mut cfg = BalanceConfig::new(Strategy::Smote, 9);
        cfg.k_neighbors = 1;
        let b = smote_multiclass(&t, &cfg).unwrap();
        let counts = b.table.class_counts().unwrap();
        assert_eq!(counts[FaultLabel::Stains.index()], 5);
        for (r, &l) in b.table.rows.iter().zip(&b.table.labels) {
            if l == FaultLabel::Stains {
                for f in 0..N_FEATURES {
                    if f != STEEL_FEATURE {
                        assert_eq!(r[f], row[f]);
                    }
                }
            }
        }
    }

    #[test]
    fn smote_rejects_small_class_and_bad_k() {
        let t = tiny_table(&[(FaultLabel::Bumps, 5), (FaultLabel::Stains, 1)]);
        let cfg = BalanceConfig::new(Strategy::Smote, 0);
        assert!(matches!(
            smote_multiclass(&t, &cfg),
            Err(Error::ClassTooSmall { .. })
        ));
        let t2 = tiny_table(&[(FaultLabel::Bumps, 8), (FaultLabel::Stains, 3)]);
        let mut cfg2 = BalanceConfig::new(Strategy::Smote, 0);
        cfg2.k_neighbors = 3;
        assert!(matches!(
            smote_multiclass(&t2, &cfg2),
            Err(Error::KOutOfRange { k: 3, max: 3 })
        ));
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let t = tiny_table(&[
            (FaultLabel::Bumps, 9),
            (FaultLabel::Stains, 4),
            (FaultLabel::Pastry, 6),
        ]);
        for strategy in [Strategy::Undersample, Strategy::Oversample, Strategy::Smote] {
            let mut cfg = BalanceConfig::new(strategy, 1234);
            cfg.k_neighbors = 2;
            let a = balance(&t, &cfg).unwrap();
            let b = balance(&t, &cfg).unwrap();
            assert_eq!(a.table, b.table);
            assert_eq!(a.provenance, b.provenance);
        }
    }
}
