//! Random forest: bootstrapped gini trees with feature subsampling,
//! out-of-bag error bookkeeping, and averaged probability output.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::sub_rng;
use crate::schema::{argmax_class, FaultLabel, Row, N_CLASSES, N_FEATURES};
use crate::tree::{train_tree_on, TreeNode, TreeParams};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: usize,
    pub min_node_size: usize,
    pub seed: u64,
}

impl ForestParams {
    /// The tuned configuration: 186 trees, 5 candidate features per split,
    /// terminal nodes of size 1.
    pub fn tuned(seed: u64) -> Self {
        ForestParams { n_trees: 186, mtry: 5, min_node_size: 1, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidParam("n_trees must be >= 1".into()));
        }
        if self.mtry < 1 || self.mtry > N_FEATURES {
            return Err(Error::InvalidParam(format!("mtry out of 1..={N_FEATURES}")));
        }
        if self.min_node_size < 1 {
            return Err(Error::InvalidParam("min_node_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<TreeNode>,
    /// Per tree: sorted indices of training rows absent from its bootstrap.
    pub oob_indices: Vec<Vec<u32>>,
    /// Misclassification rate of majority-vote out-of-bag predictions.
    pub oob_error: f64,
    pub n_train: usize,
}

/// Trains a forest. Each tree draws its own bootstrap sample and feature
/// candidates from an independent per-tree stream, so training is
/// deterministic under the configured seed regardless of scheduling.
pub fn train_forest(table: &FaultTable, params: &ForestParams) -> Result<ForestModel> {
    params.validate()?;
    let counts = table.class_counts()?;
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let n = table.len();
    let tree_params = TreeParams::forest_member(params.mtry, params.min_node_size);
    let built: Vec<(TreeNode, Vec<u32>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = sub_rng(params.seed, "forest-tree", t as u64);
            let mut in_bag = vec![false; n];
            let mut bootstrap = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                in_bag[i] = true;
                bootstrap.push(i);
            }
            let tree = train_tree_on(table, &bootstrap, &tree_params, &mut rng)
                .expect("bootstrap sample is nonempty");
            let oob: Vec<u32> = (0..n).filter(|&i| !in_bag[i]).map(|i| i as u32).collect();
            (tree, oob)
        })
        .collect();
    let (trees, oob_indices): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    let oob_error = oob_vote_error(table, &trees, &oob_indices);
    Ok(ForestModel { params: *params, trees, oob_indices, oob_error, n_train: n })
}

fn oob_vote_error(table: &FaultTable, trees: &[TreeNode], oob_indices: &[Vec<u32>]) -> f64 {
    let n = table.len();
    let mut votes = vec![[0u32; N_CLASSES]; n];
    for (tree, oob) in trees.iter().zip(oob_indices) {
        for &i in oob {
            let row = &table.rows[i as usize];
            let counts = tree.leaf_for(row);
            let mut best = 0;
            for c in 1..N_CLASSES {
                if counts[c] > counts[best] {
                    best = c;
                }
            }
            votes[i as usize][best] += 1;
        }
    }
    let mut wrong = 0usize;
    let mut counted = 0usize;
    for (i, vote) in votes.iter().enumerate() {
        if vote.iter().all(|&v| v == 0) {
            continue;
        }
        counted += 1;
        let mut best = 0;
        for c in 1..N_CLASSES {
            if vote[c] > vote[best] {
                best = c;
            }
        }
        if FaultLabel::ALL[best] != table.labels[i] {
            wrong += 1;
        }
    }
    if counted == 0 {
        0.0
    } else {
        wrong as f64 / counted as f64
    }
}

impl ForestModel {
    /// Per-feature mean total gini decrease across trees (impurity
    /// importance), in schema order.
    pub fn impurity_importance(&self) -> [f64; N_FEATURES] {
        let mut acc = [0.0; N_FEATURES];
        for tree in &self.trees {
            tree.accumulate_decrease(&mut acc);
        }
        for a in &mut acc {
            *a /= self.trees.len() as f64;
        }
        acc
    }

    /// Majority vote over per-tree argmax predictions; ties resolve to the
    /// earlier class. Agrees with the probability argmax when leaves are
    /// pure.
    pub fn predict_vote(&self, row: &Row) -> FaultLabel {
        let mut votes = [0u32; N_CLASSES];
        for tree in &self.trees {
            let counts = tree.leaf_for(row);
            let mut best = 0;
            for c in 1..N_CLASSES {
                if counts[c] > counts[best] {
                    best = c;
                }
            }
            votes[best] += 1;
        }
        let mut best = 0;
        for c in 1..N_CLASSES {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        FaultLabel::ALL[best]
    }
}

impl Model for ForestModel {
    fn predict_into(&self, row: &Row, out: &mut [f64; N_CLASSES]) {
        out.fill(0.0);
        for tree in &self.trees {
            let counts = tree.leaf_for(row);
            let total: u64 = counts.iter().map(|&c| c as u64).sum();
            let t = total as f64;
            for (o, &c) in out.iter_mut().zip(counts) {
                *o += c as f64 / t;
            }
        }
        let k = self.trees.len() as f64;
        for o in out.iter_mut() {
            *o /= k;
        }
    }
}

const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VersionedModel {
    version: u32,
    forest: ForestModel,
}

/// Writes the model as a versioned JSON document.
pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = VersionedModel { version: MODEL_VERSION, forest: model.clone() };
    let json = serde_json::to_string(&doc)
        .map_err(|e| Error::BadModel { path: path.display().to_string(), reason: e.to_string() })?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a model written by `save_model`, rejecting unknown versions.
pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let doc: VersionedModel = serde_json::from_str(&text)
        .map_err(|e| Error::BadModel { path: path.display().to_string(), reason: e.to_string() })?;
    if doc.version != MODEL_VERSION {
        return Err(Error::BadModel {
            path: path.display().to_string(),
            reason: format!("unsupported model version {}", doc.version),
        });
    }
    Ok(doc.forest)
}

/// Convenience: predicted class for every row of a table.
pub fn predict_all(model: &impl Model, table: &FaultTable) -> Vec<FaultLabel> {
    table
        .rows
        .par_iter()
        .map(|row| {
            let mut out = [0.0; N_CLASSES];
            model.predict_into(row, &mut out);
            argmax_class(&out)
        })
        .collect()
}
