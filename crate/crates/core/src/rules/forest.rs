//! Rule harvesting from trained forests: every shallow root-to-node path
//! becomes a candidate rule, pruned and scored against a reference table.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::rules::condition::{Atom, Condition};
use crate::schema::{argmax_counts, ClassCounts, FaultLabel, N_CLASSES};
use crate::tree::{SplitTest, TreeNode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

/// Unpruned path rule straight out of a tree walk.
#[derive(Debug, Clone)]
pub struct RawRule {
    pub atoms: Vec<Atom>,
    pub condition: Condition,
    pub prediction: FaultLabel,
    pub node_counts: ClassCounts,
}

/// Pruned and scored rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRule {
    pub condition: Condition,
    pub prediction: FaultLabel,
    pub freq: f64,
    pub err: f64,
    pub imp: f64,
    pub n_covered: usize,
}

impl fmt::Display for ForestRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "IF {} THEN {} (freq {:.4}, err {:.4}, imp {:.4})",
            self.condition,
            self.prediction.name(),
            self.freq,
            self.err,
            self.imp
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForestRuleConfig {
    pub max_depth: usize,
    pub delta: f64,
    pub k: usize,
}

impl Default for ForestRuleConfig {
    fn default() -> Self {
        ForestRuleConfig { max_depth: 6, delta: 0.01, k: 20 }
    }
}

fn split_atoms(feature: usize, test: &SplitTest) -> (Atom, Atom) {
    match test {
        SplitTest::Le { threshold } => (Atom::le(feature, *threshold), Atom::gt(feature, *threshold)),
        SplitTest::SteelIsA300 => (
            Atom::steel(crate::schema::Steel::A300),
            Atom::steel(crate::schema::Steel::A400),
        ),
    }
}

fn walk(
    node: &TreeNode,
    depth: usize,
    max_depth: usize,
    path: &mut Vec<Atom>,
    out: &mut Vec<RawRule>,
) -> Result<ClassCounts> {
    let counts = match node {
        TreeNode::Leaf { counts } => *counts,
        TreeNode::Split { feature, test, left, right, .. } => {
            let (left_atom, right_atom) = split_atoms(*feature, test);
            let mut counts = [0u32; N_CLASSES];
            if depth < max_depth {
                path.push(left_atom);
                let l = walk(left, depth + 1, max_depth, path, out)?;
                path.pop();
                path.push(right_atom);
                let r = walk(right, depth + 1, max_depth, path, out)?;
                path.pop();
                for c in 0..N_CLASSES {
                    counts[c] = l[c] + r[c];
                }
            } else {
                accumulate_counts(node, &mut counts);
            }
            counts
        }
    };
    if depth >= 1 {
        out.push(RawRule {
            atoms: path.clone(),
            condition: Condition::from_atoms(path)?,
            prediction: argmax_counts(&counts),
            node_counts: counts,
        });
    }
    Ok(counts)
}

fn accumulate_counts(node: &TreeNode, acc: &mut ClassCounts) {
    match node {
        TreeNode::Leaf { counts } => {
            for c in 0..N_CLASSES {
                acc[c] += counts[c];
            }
        }
        TreeNode::Split { left, right, .. } => {
            accumulate_counts(left, acc);
            accumulate_counts(right, acc);
        }
    }
}

/// Every root-to-node path of depth 1..=max_depth across all trees,
/// deduplicated by normalized condition (first occurrence kept).
pub fn harvest_paths(forest: &ForestModel, max_depth: usize) -> Result<Vec<RawRule>> {
    let mut all = Vec::new();
    for tree in &forest.trees {
        let mut path = Vec::new();
        walk(tree, 0, max_depth, &mut path, &mut all)?;
    }
    let mut seen = HashSet::new();
    Ok(all
        .into_iter()
        .filter(|r| seen.insert(r.condition.key()))
        .collect())
}

const WORD_BITS: usize = 64;

fn atom_mask(atom: &Atom, table: &FaultTable) -> Vec<u64> {
    let cond = Condition::from_atoms(std::slice::from_ref(atom)).expect("single atom");
    let words = table.len().div_ceil(WORD_BITS);
    let mut mask = vec![0u64; words];
    for (i, row) in table.rows.iter().enumerate() {
        if cond.matches(row) {
            mask[i / WORD_BITS] |= 1 << (i % WORD_BITS);
        }
    }
    mask
}

fn covered_stats(mask: &[u64], table: &FaultTable) -> (usize, ClassCounts) {
    let mut counts = [0u32; N_CLASSES];
    let mut covered = 0;
    for (w, &word) in mask.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let i = w * WORD_BITS + bits.trailing_zeros() as usize;
            counts[table.labels[i].index()] += 1;
            covered += 1;
            bits &= bits - 1;
        }
    }
    (covered, counts)
}

fn and_all(masks: &[Vec<u64>], active: &[bool], words: usize) -> Vec<u64> {
    let mut acc = vec![u64::MAX; words];
    for (mask, &on) in masks.iter().zip(active) {
        if on {
            for (a, m) in acc.iter_mut().zip(mask) {
                *a &= m;
            }
        }
    }
    acc
}

fn clip_tail(mask: &mut [u64], n: usize) {
    let rem = n % WORD_BITS;
    if rem != 0 {
        if let Some(last) = mask.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

/// Fixes the prediction at the covered-set majority, then greedily drops
/// atoms from the deepest end while the covered-set error rises by at
/// most `delta` per dropped atom. Coverage metrics are recomputed on the
/// final condition.
pub fn prune_rule(raw: &RawRule, table: &FaultTable, delta: f64) -> Result<ForestRule> {
    let n = table.len();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let words = n.div_ceil(WORD_BITS);
    let masks: Vec<Vec<u64>> = raw.atoms.iter().map(|a| atom_mask(a, table)).collect();
    let mut active = vec![true; masks.len()];
    let mut current = and_all(&masks, &active, words);
    clip_tail(&mut current, n);
    let (covered, counts) = covered_stats(&current, table);
    if covered == 0 {
        return Err(Error::EmptyCoverage);
    }
    let prediction = argmax_counts(&counts);
    let p = prediction.index();
    let mut current_err = 1.0 - counts[p] as f64 / covered as f64;
    for i in (0..masks.len()).rev() {
        if active.iter().filter(|&&a| a).count() == 1 {
            break;
        }
        active[i] = false;
        let mut trial = and_all(&masks, &active, words);
        clip_tail(&mut trial, n);
        let (cov, cnt) = covered_stats(&trial, table);
        let err = 1.0 - cnt[p] as f64 / cov as f64;
        if err - current_err <= delta {
            debug_assert!(err <= current_err + delta + 1e-12);
            current_err = err;
        } else {
            active[i] = true;
        }
    }
    let kept: Vec<Atom> = raw
        .atoms
        .iter()
        .zip(&active)
        .filter(|&(_, &on)| on)
        .map(|(a, _)| *a)
        .collect();
    let condition = Condition::from_atoms(&kept)?;
    let mut final_mask = and_all(&masks, &active, words);
    clip_tail(&mut final_mask, n);
    let (n_covered, final_counts) = covered_stats(&final_mask, table);
    let err = 1.0 - final_counts[p] as f64 / n_covered as f64;
    Ok(ForestRule {
        condition,
        prediction,
        freq: n_covered as f64 / n as f64,
        err,
        imp: 0.0,
        n_covered,
    })
}

/// Harvests, prunes, and deduplicates rules without scoring them.
pub fn harvest_pruned(
    forest: &ForestModel,
    table: &FaultTable,
    max_depth: usize,
    delta: f64,
) -> Result<Vec<ForestRule>> {
    let raw = harvest_paths(forest, max_depth)?;
    let pruned: Vec<Result<Option<ForestRule>>> = raw
        .par_iter()
        .map(|r| match prune_rule(r, table, delta) {
            Ok(rule) => Ok(Some(rule)),
            Err(Error::EmptyCoverage) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rule in pruned {
        if let Some(rule) = rule? {
            if seen.insert((rule.condition.key(), rule.prediction)) {
                out.push(rule);
            }
        }
    }
    Ok(out)
}

/// Scores rules by (1 - err) x freq, greedily keeps at most `k` with a
/// per-class cap of ceil(k / classes), and rescales so the best selected
/// rule has imp exactly 1.0. Output is sorted by descending imp.
pub fn score_and_select(rules: &[ForestRule], k: usize) -> Vec<ForestRule> {
    if rules.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..rules.len()).collect();
    let raw_imp: Vec<f64> = rules.iter().map(|r| (1.0 - r.err) * r.freq).collect();
    order.sort_by(|&a, &b| raw_imp[b].total_cmp(&raw_imp[a]).then(a.cmp(&b)));
    let cap = k.div_ceil(N_CLASSES);
    let mut per_class = [0usize; N_CLASSES];
    let mut selected = Vec::new();
    for &i in &order {
        if selected.len() == k {
            break;
        }
        let c = rules[i].prediction.index();
        if per_class[c] < cap {
            per_class[c] += 1;
            selected.push(i);
        }
    }
    let max_imp = selected
        .iter()
        .map(|&i| raw_imp[i])
        .fold(f64::NEG_INFINITY, f64::max);
    selected
        .into_iter()
        .map(|i| {
            let mut rule = rules[i].clone();
            rule.imp = if max_imp > 0.0 { raw_imp[i] / max_imp } else { 0.0 };
            rule
        })
        .collect()
}

/// Full pipeline: harvest at `cfg.max_depth`, prune with `cfg.delta`,
/// keep the top `cfg.k` scored rules.
pub fn mine_forest_rules(
    forest: &ForestModel,
    table: &FaultTable,
    cfg: &ForestRuleConfig,
) -> Result<Vec<ForestRule>> {
    let pruned = harvest_pruned(forest, table, cfg.max_depth, cfg.delta)?;
    Ok(score_and_select(&pruned, cfg.k))
}
