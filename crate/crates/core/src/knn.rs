//! k-nearest-neighbours baseline on standardized numeric features with a
//! 0/1 mismatch term for TypeOfSteel.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::schema::{FaultLabel, Row, N_CLASSES, N_FEATURES, STEEL_FEATURE};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    mean: [f64; N_FEATURES],
    sd: [f64; N_FEATURES],
    /// Training rows with numeric features z-scored; the TypeOfSteel slot
    /// keeps its raw 0/1 encoding.
    scaled: Vec<Row>,
    labels: Vec<FaultLabel>,
}

impl KnnModel {
    pub fn fit(table: &FaultTable, k: usize) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::EmptyTable);
        }
        if k < 1 || k > n {
            return Err(Error::KOutOfRange { k, max: n });
        }
        let mut mean = [0.0; N_FEATURES];
        let mut sd = [1.0; N_FEATURES];
        for f in 0..N_FEATURES {
            if f == STEEL_FEATURE {
                continue;
            }
            let m = table.rows.iter().map(|r| r[f]).sum::<f64>() / n as f64;
            let var = table.rows.iter().map(|r| (r[f] - m).powi(2)).sum::<f64>() / n as f64;
            mean[f] = m;
            sd[f] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        let scaled = table.rows.iter().map(|r| scale_row(r, &mean, &sd)).collect();
        Ok(KnnModel { k, mean, sd, scaled, labels: table.labels.clone() })
    }

    fn squared_distance(&self, a: &Row, b: &Row) -> f64 {
        let mut d = 0.0;
        for f in 0..N_FEATURES {
            if f == STEEL_FEATURE {
                if a[f] != b[f] {
                    d += 1.0;
                }
            } else {
                let diff = a[f] - b[f];
                d += diff * diff;
            }
        }
        d
    }
}

fn scale_row(row: &Row, mean: &[f64; N_FEATURES], sd: &[f64; N_FEATURES]) -> Row {
    let mut out = *row;
    for f in 0..N_FEATURES {
        if f != STEEL_FEATURE {
            out[f] = (row[f] - mean[f]) / sd[f];
        }
    }
    out
}

impl Model for KnnModel {
    fn predict_into(&self, row: &Row, out: &mut [f64; N_CLASSES]) {
        let q = scale_row(row, &self.mean, &self.sd);
        // Distance ties resolve to the lower training-row index.
        let mut dist: Vec<(f64, usize)> = self
            .scaled
            .iter()
            .enumerate()
            .map(|(i, r)| (self.squared_distance(&q, r), i))
            .collect();
        dist.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.fill(0.0);
        for &(_, i) in &dist[..self.k] {
            out[self.labels[i].index()] += 1.0;
        }
        for o in out.iter_mut() {
            *o /= self.k as f64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_of(points: &[(f64, FaultLabel)]) -> FaultTable {
        let rows = points
            .iter()
            .map(|&(x, _)| {
                let mut r = [0.0; N_FEATURES];
                r[0] = x;
                r
            })
            .collect();
        FaultTable { rows, labels: points.iter().map(|&(_, l)| l).collect() }
    }

    #[test]
    fn k1_on_training_row_returns_its_class() {
        let t = table_of(&[
            (0.0, FaultLabel::Bumps),
            (5.0, FaultLabel::Stains),
            (9.0, FaultLabel::Pastry),
        ]);
        let m = KnnModel::fit(&t, 1).unwrap();
        for (row, &label) in t.rows.iter().zip(&t.labels) {
            let p = m.predict_proba(row);
            assert_eq!(p[label.index()], 1.0);
            assert_eq!(m.predict(row), label);
        }
    }

    #[test]
    fn k3_mixed_neighborhood_gives_two_thirds() {
        let t = table_of(&[
            (1.0, FaultLabel::Bumps),
            (-1.0, FaultLabel::Bumps),
            (1.0, FaultLabel::Stains),
        ]);
        let m = KnnModel::fit(&t, 3).unwrap();
        let mut q = [0.0; N_FEATURES];
        q[0] = 0.0;
        let p = m.predict_proba(&q);
        assert!((p[FaultLabel::Bumps.index()] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[FaultLabel::Stains.index()] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn distance_ties_break_by_row_index() {
        // Two training rows at the same location with different classes:
        // k = 1 must pick the earlier row.
        let t = table_of(&[(2.0, FaultLabel::ZScratch), (2.0, FaultLabel::Bumps)]);
        let m = KnnModel::fit(&t, 1).unwrap();
        let mut q = [0.0; N_FEATURES];
        q[0] = 2.0;
        assert_eq!(m.predict(&q), FaultLabel::ZScratch);
    }

    #[test]
    fn steel_mismatch_separates_otherwise_equal_rows() {
        let mut t = table_of(&[(0.0, FaultLabel::Bumps), (0.0, FaultLabel::Stains)]);
        t.rows[1][STEEL_FEATURE] = 1.0;
        let m = KnnModel::fit(&t, 1).unwrap();
        let mut q = t.rows[0];
        q[STEEL_FEATURE] = 1.0;
        assert_eq!(m.predict(&q), FaultLabel::Stains);
    }

    #[test]
    fn bad_k_rejected() {
        let t = table_of(&[(0.0, FaultLabel::Bumps)]);
        assert!(matches!(KnnModel::fit(&t, 0), Err(Error::KOutOfRange { .. })));
        assert!(matches!(KnnModel::fit(&t, 2), Err(Error::KOutOfRange { .. })));
        assert!(matches!(
            KnnModel::fit(&FaultTable { rows: vec![], labels: vec![] }, 1),
            Err(Error::EmptyTable)
        ));
    }
}
