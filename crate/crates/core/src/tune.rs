//! Grid search over forest hyperparameters and the k sweep for the
//! nearest-neighbour learner.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::eval::{cross_validate, FoldPlan, LearnerSpec};
use crate::forest::ForestParams;
use serde::{Deserialize, Serialize};

/// Cartesian grid of forest settings. Candidates are visited with every
/// axis ascending, and only a strictly better accuracy replaces the
/// incumbent, so ties resolve toward fewer trees, then smaller mtry, then
/// smaller leaves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub mtry: Vec<usize>,
    pub min_node_size: Vec<usize>,
}

impl ForestGrid {
    pub fn candidates(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let mut n_trees = self.n_trees.clone();
        let mut mtry = self.mtry.clone();
        let mut mns = self.min_node_size.clone();
        n_trees.sort_unstable();
        mtry.sort_unstable();
        mns.sort_unstable();
        for &t in &n_trees {
            for &m in &mtry {
                for &s in &mns {
                    out.push((t, m, s));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneOutcome<P> {
    pub best: P,
    pub best_accuracy: f64,
    /// Every candidate with its cross-validated accuracy, in visit order.
    pub trace: Vec<(P, f64)>,
}

/// Cross-validates every grid cell on `table` and returns the winner.
pub fn tune_forest(
    table: &FaultTable,
    grid: &ForestGrid,
    plan: &FoldPlan,
    seed: u64,
) -> Result<TuneOutcome<ForestParams>> {
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(Error::InvalidParam("empty tuning grid".into()));
    }
    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<(ForestParams, f64)> = None;
    for (n_trees, mtry, min_node_size) in candidates {
        let params = ForestParams { n_trees, mtry, min_node_size, seed };
        let acc = cross_validate(table, &LearnerSpec::Forest(params), plan)?.accuracy;
        trace.push((params, acc));
        if best.as_ref().is_none_or(|&(_, b)| acc > b) {
            best = Some((params, acc));
        }
    }
    let (best, best_accuracy) = best.unwrap();
    Ok(TuneOutcome { best, best_accuracy, trace })
}

/// Sweeps k over an inclusive range; ties keep the smallest k.
pub fn tune_knn(
    table: &FaultTable,
    k_min: usize,
    k_max: usize,
    plan: &FoldPlan,
) -> Result<TuneOutcome<usize>> {
    if k_min < 1 || k_min > k_max {
        return Err(Error::InvalidParam("bad k range".into()));
    }
    let mut trace = Vec::with_capacity(k_max - k_min + 1);
    let mut best: Option<(usize, f64)> = None;
    for k in k_min..=k_max {
        let acc = cross_validate(table, &LearnerSpec::Knn { k }, plan)?.accuracy;
        trace.push((k, acc));
        if best.as_ref().is_none_or(|&(_, b)| acc > b) {
            best = Some((k, acc));
        }
    }
    let (best, best_accuracy) = best.unwrap();
    Ok(TuneOutcome { best, best_accuracy, trace })
}
