//! CART-style decision tree: greedy gini splitting with optional feature
//! subsampling, serving both as the forest's base learner and as the
//! standalone pruned baseline.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::schema::{ClassCounts, Row, Steel, N_CLASSES, N_FEATURES, STEEL_FEATURE};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Gini impurity 1 - sum(p_i^2) of a class-count vector.
pub fn gini(counts: &ClassCounts) -> Result<f64> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(Error::ZeroSumCounts);
    }
    let t = total as f64;
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64 / t).powi(2)).sum();
    Ok(1.0 - sum_sq)
}

/// Tree growth controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TreeParams {
    /// Minimum rows at a node to attempt a split.
    pub min_split: usize,
    /// Minimum rows in each child.
    pub min_bucket: usize,
    /// Complexity gate: a split must reduce total weighted gini by at least
    /// `cp` times the root impurity.
    pub cp: f64,
    /// Candidate features per split; `None` considers all.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
}

impl TreeParams {
    /// Fully-grown forest member (node size 1, no complexity gate).
    pub fn forest_member(mtry: usize, min_node_size: usize) -> Self {
        TreeParams {
            min_split: (min_node_size + 1).max(2),
            min_bucket: min_node_size.max(1),
            cp: 0.0,
            mtry: Some(mtry),
            max_depth: None,
        }
    }

    /// Pruned standalone baseline.
    pub fn baseline() -> Self {
        TreeParams { min_split: 20, min_bucket: 7, cp: 0.01, mtry: None, max_depth: None }
    }

    fn validate(&self) -> Result<()> {
        if self.min_bucket < 1 || self.min_split < 2 {
            return Err(Error::InvalidParam("min_bucket >= 1 and min_split >= 2 required".into()));
        }
        if let Some(m) = self.mtry {
            if m < 1 || m > N_FEATURES {
                return Err(Error::InvalidParam(format!("mtry {m} out of 1..={N_FEATURES}")));
            }
        }
        if !(0.0..=1.0).contains(&self.cp) {
            return Err(Error::InvalidParam("cp must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Node test; numeric values route left when `value <= threshold`, the
/// categorical TypeOfSteel routes A300 left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitTest {
    Le { threshold: f64 },
    SteelIsA300,
}

impl SplitTest {
    pub fn goes_left(&self, row: &Row, feature: usize) -> bool {
        match self {
            SplitTest::Le { threshold } => row[feature] <= *threshold,
            SplitTest::SteelIsA300 => Steel::from_encoded(row[STEEL_FEATURE]) == Steel::A300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        test: SplitTest,
        /// Total weighted gini decrease of this split, as a fraction of the
        /// tree's root sample size.
        decrease: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: ClassCounts,
    },
}

impl TreeNode {
    pub fn leaf_for(&self, row: &Row) -> &ClassCounts {
        match self {
            TreeNode::Leaf { counts } => counts,
            TreeNode::Split { feature, test, left, right, .. } => {
                if test.goes_left(row, *feature) {
                    left.leaf_for(row)
                } else {
                    right.leaf_for(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Accumulates per-feature total gini decrease into `acc`.
    pub fn accumulate_decrease(&self, acc: &mut [f64; N_FEATURES]) {
        if let TreeNode::Split { feature, decrease, left, right, .. } = self {
            acc[*feature] += decrease;
            left.accumulate_decrease(acc);
            right.accumulate_decrease(acc);
        }
    }
}

/// A standalone trained tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
    pub params: TreeParams,
}

impl Model for TreeModel {
    fn predict_into(&self, row: &Row, out: &mut [f64; N_CLASSES]) {
        let counts = self.root.leaf_for(row);
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        for (o, &c) in out.iter_mut().zip(counts) {
            *o = c as f64 / total as f64;
        }
    }
}

/// Trains a tree on the rows addressed by `indices` (duplicates allowed, as
/// in a bootstrap sample). The RNG drives feature subsampling only; with
/// `mtry = None` it is never consulted.
pub fn train_tree_on(
    table: &FaultTable,
    indices: &[usize],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<TreeNode> {
    params.validate()?;
    if indices.is_empty() {
        return Err(Error::EmptyTable);
    }
    let root_counts = count_classes(table, indices);
    let root_gini = gini(&root_counts)?;
    let mut builder = Builder {
        table,
        params,
        rng,
        n_root: indices.len() as f64,
        min_decrease: params.cp * root_gini,
        all_features: (0..N_FEATURES).collect(),
    };
    let mut idx = indices.to_vec();
    Ok(builder.build(&mut idx, root_counts, 0))
}

/// Trains on all rows of the table.
pub fn train_tree(table: &FaultTable, params: &TreeParams, rng: &mut ChaCha8Rng) -> Result<TreeModel> {
    let indices: Vec<usize> = (0..table.len()).collect();
    let root = train_tree_on(table, &indices, params, rng)?;
    Ok(TreeModel { root, params: *params })
}

fn count_classes(table: &FaultTable, indices: &[usize]) -> ClassCounts {
    let mut counts = [0u32; N_CLASSES];
    for &i in indices {
        counts[table.labels[i].index()] += 1;
    }
    counts
}

struct Builder<'a> {
    table: &'a FaultTable,
    params: &'a TreeParams,
    rng: &'a mut ChaCha8Rng,
    n_root: f64,
    /// Required total weighted decrease (fraction of root rows times root
    /// gini scale) for a split to be kept.
    min_decrease: f64,
    all_features: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    test: SplitTest,
    /// (n*g - nl*gl - nr*gr) / n_root
    decrease: f64,
}

impl Builder<'_> {
    fn build(&mut self, indices: &mut [usize], counts: ClassCounts, depth: usize) -> TreeNode {
        let n = indices.len();
        let node_gini = gini(&counts).expect("nonempty node");
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if node_gini == 0.0 || n < self.params.min_split || depth_capped {
            return TreeNode::Leaf { counts };
        }
        let candidates = self.sample_features();
        let Some(best) = self.best_split(indices, &counts, node_gini, &candidates) else {
            return TreeNode::Leaf { counts };
        };
        let split_at = partition(self.table, indices, best.feature, &best.test);
        let (left_idx, right_idx) = indices.split_at_mut(split_at);
        let left_counts = count_classes(self.table, left_idx);
        let mut right_counts = counts;
        for (r, l) in right_counts.iter_mut().zip(&left_counts) {
            *r -= l;
        }
        let left = self.build(left_idx, left_counts, depth + 1);
        let right = self.build(right_idx, right_counts, depth + 1);
        TreeNode::Split {
            feature: best.feature,
            test: best.test,
            decrease: best.decrease,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn sample_features(&mut self) -> Vec<usize> {
        match self.params.mtry {
            None => self.all_features.clone(),
            Some(m) => {
                let mut pool = self.all_features.clone();
                let (chosen, _) = pool.partial_shuffle(self.rng, m);
                let mut chosen = chosen.to_vec();
                chosen.sort_unstable();
                chosen
            }
        }
    }

    /// Scans candidate features in ascending index order and thresholds in
    /// ascending value order; strictly better decrease wins, so ties keep
    /// the first candidate encountered.
    fn best_split(
        &self,
        indices: &[usize],
        counts: &ClassCounts,
        node_gini: f64,
        candidates: &[usize],
    ) -> Option<BestSplit> {
        let n = indices.len();
        let node_score = n as f64 * node_gini;
        let mut best: Option<BestSplit> = None;
        let mut scratch: Vec<(f64, u8)> = Vec::with_capacity(n);
        for &feature in candidates {
            if feature == STEEL_FEATURE {
                let mut left = [0u32; N_CLASSES];
                let mut n_left = 0usize;
                for &i in indices {
                    if Steel::from_encoded(self.table.rows[i][STEEL_FEATURE]) == Steel::A300 {
                        left[self.table.labels[i].index()] += 1;
                        n_left += 1;
                    }
                }
                let n_right = n - n_left;
                if n_left < self.params.min_bucket || n_right < self.params.min_bucket {
                    continue;
                }
                let mut right = *counts;
                for (r, l) in right.iter_mut().zip(&left) {
                    *r -= l;
                }
                let dec = (node_score
                    - n_left as f64 * gini(&left).unwrap()
                    - n_right as f64 * gini(&right).unwrap())
                    / self.n_root;
                self.consider(&mut best, feature, SplitTest::SteelIsA300, dec);
                continue;
            }
            scratch.clear();
            for &i in indices {
                scratch.push((self.table.rows[i][feature], self.table.labels[i].index() as u8));
            }
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0u32; N_CLASSES];
            let mut right = *counts;
            for k in 0..n - 1 {
                let (v, c) = scratch[k];
                left[c as usize] += 1;
                right[c as usize] -= 1;
                let next_v = scratch[k + 1].0;
                if v == next_v {
                    continue;
                }
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < self.params.min_bucket || n_right < self.params.min_bucket {
                    continue;
                }
                let dec = (node_score
                    - n_left as f64 * gini(&left).unwrap()
                    - n_right as f64 * gini(&right).unwrap())
                    / self.n_root;
                let threshold = v + 0.5 * (next_v - v);
                self.consider(&mut best, feature, SplitTest::Le { threshold }, dec);
            }
        }
        best
    }

    fn consider(&self, best: &mut Option<BestSplit>, feature: usize, test: SplitTest, decrease: f64) {
        if decrease < self.min_decrease {
            return;
        }
        let better = match best {
            None => true,
            Some(b) => decrease > b.decrease,
        };
        if better {
            *best = Some(BestSplit { feature, test, decrease });
        }
    }
}

/// Stable partition of `indices`: rows passing the test first. Returns the
/// boundary position.
fn partition(table: &FaultTable, indices: &mut [usize], feature: usize, test: &SplitTest) -> usize {
    let (left, right): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| test.goes_left(&table.rows[i], feature));
    let split_at = left.len();
    for (slot, v) in indices.iter_mut().zip(left.into_iter().chain(right)) {
        *slot = v;
    }
    split_at
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stage_rng;
    use crate::schema::FaultLabel;

    fn table_of(points: &[(f64, f64, FaultLabel)]) -> FaultTable {
        let rows = points
            .iter()
            .map(|&(a, b, _)| {
                let mut r = [0.0; N_FEATURES];
                r[0] = a;
                r[1] = b;
                r
            })
            .collect();
        let labels = points.iter().map(|&(_, _, l)| l).collect();
        FaultTable { rows, labels }
    }

    fn unpruned() -> TreeParams {
        TreeParams { min_split: 2, min_bucket: 1, cp: 0.0, mtry: None, max_depth: None }
    }

    #[test]
    fn gini_oracles() {
        assert_eq!(gini(&[10, 0, 0, 0, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[5, 5, 0, 0, 0, 0, 0]).unwrap(), 0.5);
        assert_eq!(gini(&[2, 1, 1, 0, 0, 0, 0]).unwrap(), 0.625);
        assert!(matches!(gini(&[0; N_CLASSES]), Err(Error::ZeroSumCounts)));
    }

    #[test]
    fn single_row_gives_single_leaf() {
        let t = table_of(&[(1.0, 2.0, FaultLabel::Stains)]);
        let m = train_tree(&t, &unpruned(), &mut stage_rng(0, "t")).unwrap();
        assert_eq!(m.root, TreeNode::Leaf { counts: {
            let mut c = [0; N_CLASSES];
            c[FaultLabel::Stains.index()] = 1;
            c
        }});
        assert_eq!(m.predict(&t.rows[0]), FaultLabel::Stains);
    }

    #[test]
    fn threshold_separable_classes_need_depth_one() {
        let t = table_of(&[
            (1.0, 0.0, FaultLabel::Bumps),
            (2.0, 0.0, FaultLabel::Bumps),
            (8.0, 0.0, FaultLabel::Pastry),
            (9.0, 0.0, FaultLabel::Pastry),
        ]);
        let m = train_tree(&t, &unpruned(), &mut stage_rng(0, "t")).unwrap();
        assert_eq!(m.root.depth(), 1);
        for (row, &label) in t.rows.iter().zip(&t.labels) {
            assert_eq!(m.predict(row), label);
        }
    }

    #[test]
    fn xor_needs_depth_two_and_fits_exactly() {
        let t = table_of(&[
            (0.0, 0.0, FaultLabel::Bumps),
            (1.0, 1.0, FaultLabel::Bumps),
            (0.0, 1.0, FaultLabel::Pastry),
            (1.0, 0.0, FaultLabel::Pastry),
        ]);
        let m = train_tree(&t, &unpruned(), &mut stage_rng(0, "t")).unwrap();
        assert!(m.root.depth() >= 2);
        for (row, &label) in t.rows.iter().zip(&t.labels) {
            assert_eq!(m.predict(row), label);
        }
    }

    #[test]
    fn steel_split_routes_by_level() {
        let mut t = table_of(&[
            (0.0, 0.0, FaultLabel::Bumps),
            (0.0, 0.0, FaultLabel::Pastry),
        ]);
        t.rows[0][STEEL_FEATURE] = Steel::A300.encoded();
        t.rows[1][STEEL_FEATURE] = Steel::A400.encoded();
        let m = train_tree(&t, &unpruned(), &mut stage_rng(0, "t")).unwrap();
        match &m.root {
            TreeNode::Split { feature, test, .. } => {
                assert_eq!(*feature, STEEL_FEATURE);
                assert_eq!(*test, SplitTest::SteelIsA300);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(m.predict(&t.rows[0]), FaultLabel::Bumps);
        assert_eq!(m.predict(&t.rows[1]), FaultLabel::Pastry);
    }

    #[test]
    fn complexity_gate_blocks_weak_splits() {
        // Alternating labels along x: the best single split recovers only
        // O(1/n) of the root impurity, far below cp times root gini.
        let points: Vec<_> = (0..50)
            .map(|i| {
                let l = if i % 2 == 0 { FaultLabel::Bumps } else { FaultLabel::Pastry };
                (i as f64, 0.0, l)
            })
            .collect();
        let t = table_of(&points);
        let mut params = unpruned();
        params.cp = 0.2;
        let gated = train_tree(&t, &params, &mut stage_rng(0, "t")).unwrap();
        assert_eq!(gated.root.depth(), 0);
        params.cp = 0.0;
        let free = train_tree(&t, &params, &mut stage_rng(0, "t")).unwrap();
        assert!(free.root.depth() >= 1);
    }

    #[test]
    fn same_seed_same_tree() {
        let t = table_of(
            &(0..40)
                .map(|i| {
                    let l = if (i * 7) % 3 == 0 { FaultLabel::Bumps } else { FaultLabel::Stains };
                    ((i * 13 % 17) as f64, (i * 5 % 11) as f64, l)
                })
                .collect::<Vec<_>>(),
        );
        let mut params = unpruned();
        params.mtry = Some(1);
        let a = train_tree(&t, &params, &mut stage_rng(5, "t")).unwrap();
        let b = train_tree(&t, &params, &mut stage_rng(5, "t")).unwrap();
        assert_eq!(a.root, b.root);
    }

    #[test]
    fn split_children_never_increase_weighted_impurity() {
        fn check(node: &TreeNode) {
            if let TreeNode::Split { decrease, left, right, .. } = node {
                assert!(*decrease >= 0.0);
                check(left);
                check(right);
            }
        }
        let t = table_of(
            &(0..60)
                .map(|i| {
                    let l = match i % 3 {
                        0 => FaultLabel::Bumps,
                        1 => FaultLabel::Stains,
                        _ => FaultLabel::ZScratch,
                    };
                    ((i % 7) as f64, (i % 5) as f64, l)
                })
                .collect::<Vec<_>>(),
        );
        let m = train_tree(&t, &unpruned(), &mut stage_rng(0, "t")).unwrap();
        check(&m.root);
    }
}
