//! Equal-frequency discretization and level-wise class association rule
//! mining with fault labels as consequents.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::rules::condition::{Atom, Condition};
use crate::schema::{FaultLabel, Steel, FEATURE_NAMES, N_CLASSES, N_FEATURES, STEEL_FEATURE};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AssocConfig {
    pub bins: usize,
    pub min_support: f64,
    pub min_confidence: f64,
    pub max_len: usize,
}

impl Default for AssocConfig {
    fn default() -> Self {
        AssocConfig { bins: 20, min_support: 0.01, min_confidence: 0.85, max_len: 5 }
    }
}

/// Equal-frequency cut points per numeric feature. Cut `c_j` separates
/// interval j-1 from interval j; boundary intervals extend to infinity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Discretization {
    pub bins: usize,
    pub cuts: Vec<Vec<f64>>,
    /// Features whose distinct-value count forced fewer bins.
    pub reduced: Vec<usize>,
}

impl Discretization {
    pub fn bin_of(&self, feature: usize, value: f64) -> usize {
        self.cuts[feature].partition_point(|c| *c <= value)
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }
}

/// One mineable item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ItemDef {
    Bin { feature: usize, bin: usize, lo: Option<f64>, hi: Option<f64> },
    SteelLevel(Steel),
    Fault(FaultLabel),
}

impl ItemDef {
    pub fn display(&self) -> String {
        match self {
            ItemDef::Bin { feature, lo, hi, .. } => {
                let name = FEATURE_NAMES[*feature];
                let lo = lo.map_or("-inf".to_string(), |v| format!("{v}"));
                let hi = hi.map_or("inf".to_string(), |v| format!("{v}"));
                format!("{name}=[{lo},{hi})")
            }
            ItemDef::SteelLevel(s) => format!("TypeOfSteel={}", s.name()),
            ItemDef::Fault(l) => format!("Fault={}", l.name()),
        }
    }
}

/// Item id space: numeric bins in schema order, the two steel levels in
/// the steel feature's position, fault items last.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemCatalog {
    pub items: Vec<ItemDef>,
    pub fault_base: u32,
}

impl ItemCatalog {
    pub fn is_fault(&self, item: u32) -> bool {
        item >= self.fault_base
    }

    pub fn fault_item(&self, label: FaultLabel) -> u32 {
        self.fault_base + label.index() as u32
    }

    pub fn fault_of(&self, item: u32) -> Option<FaultLabel> {
        self.is_fault(item)
            .then(|| FaultLabel::ALL[(item - self.fault_base) as usize])
    }
}

/// Rows as itemsets plus per-item transaction bitsets.
#[derive(Debug, Clone)]
pub struct TransactionTable {
    pub n: usize,
    pub catalog: ItemCatalog,
    pub row_items: Vec<Vec<u32>>,
    tidsets: Vec<Vec<u64>>,
}

impl TransactionTable {
    /// Builds a table straight from itemsets; every row must hold exactly
    /// one fault item from `catalog`.
    pub fn from_rows(catalog: ItemCatalog, row_items: Vec<Vec<u32>>) -> Result<Self> {
        let n = row_items.len();
        if n == 0 {
            return Err(Error::EmptyTable);
        }
        let mut tidsets = vec![vec![0u64; n.div_ceil(64)]; catalog.items.len()];
        for (i, set) in row_items.iter().enumerate() {
            let faults = set.iter().filter(|&&it| catalog.is_fault(it)).count();
            if faults != 1 {
                return Err(Error::AmbiguousOneHot { row: i, n_set: faults });
            }
            for &item in set {
                if item as usize >= catalog.items.len() {
                    return Err(Error::InvalidParam(format!("item {item} outside catalog")));
                }
                tidsets[item as usize][i / 64] |= 1 << (i % 64);
            }
        }
        Ok(TransactionTable { n, catalog, row_items, tidsets })
    }

    pub fn items_per_row(&self) -> usize {
        N_FEATURES + 1
    }

    fn tidset_with(&self, base: &[u64], item: u32) -> Vec<u64> {
        let tid = &self.tidsets[item as usize];
        base.iter().zip(tid).map(|(a, b)| a & b).collect()
    }

    fn item_count(&self, item: u32) -> u64 {
        self.tidsets[item as usize]
            .iter()
            .map(|w| w.count_ones() as u64)
            .sum()
    }
}

/// Equal-frequency discretization: for `bins` target bins the cut before
/// quantile position p is the midpoint of the two values straddling p.
/// Duplicate cuts merge, reducing the effective bin count.
pub fn discretize(table: &FaultTable, bins: usize) -> Result<(Discretization, TransactionTable)> {
    if bins < 2 {
        return Err(Error::InvalidParam("bins must be >= 2".into()));
    }
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let n = table.len();
    let mut cuts = vec![Vec::new(); N_FEATURES];
    let mut reduced = Vec::new();
    for f in 0..N_FEATURES {
        if f == STEEL_FEATURE {
            continue;
        }
        let mut v: Vec<f64> = table.rows.iter().map(|r| r[f]).collect();
        v.sort_by(f64::total_cmp);
        let mut c = Vec::with_capacity(bins - 1);
        for i in 1..bins {
            let pos = i * n / bins;
            if pos == 0 || pos >= n {
                continue;
            }
            let cut = (v[pos - 1] + v[pos]) / 2.0;
            if c.last() != Some(&cut) && v[pos - 1] != v[pos] {
                c.push(cut);
            }
        }
        if c.len() < bins - 1 {
            reduced.push(f);
        }
        cuts[f] = c;
    }
    let disc = Discretization { bins, cuts, reduced };

    let mut items = Vec::new();
    let mut base = [0u32; N_FEATURES];
    for f in 0..N_FEATURES {
        base[f] = items.len() as u32;
        if f == STEEL_FEATURE {
            items.push(ItemDef::SteelLevel(Steel::A300));
            items.push(ItemDef::SteelLevel(Steel::A400));
        } else {
            let k = disc.n_bins(f);
            for b in 0..k {
                let lo = (b > 0).then(|| disc.cuts[f][b - 1]);
                let hi = (b + 1 < k).then(|| disc.cuts[f][b]);
                items.push(ItemDef::Bin { feature: f, bin: b, lo, hi });
            }
        }
    }
    let fault_base = items.len() as u32;
    for &l in &FaultLabel::ALL {
        items.push(ItemDef::Fault(l));
    }
    let catalog = ItemCatalog { items, fault_base };

    let mut tidsets = vec![vec![0u64; n.div_ceil(64)]; catalog.items.len()];
    let mut row_items = Vec::with_capacity(n);
    for (i, (row, label)) in table.rows.iter().zip(&table.labels).enumerate() {
        let mut set = Vec::with_capacity(N_FEATURES + 1);
        for f in 0..N_FEATURES {
            let item = if f == STEEL_FEATURE {
                base[f] + Steel::from_encoded(row[f]).encoded() as u32
            } else {
                base[f] + disc.bin_of(f, row[f]) as u32
            };
            set.push(item);
        }
        set.push(catalog.fault_item(*label));
        for &item in &set {
            tidsets[item as usize][i / 64] |= 1 << (i % 64);
        }
        row_items.push(set);
    }
    Ok((disc, TransactionTable { n, catalog, row_items, tidsets }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocRule {
    pub antecedent: Vec<u32>,
    pub consequent: FaultLabel,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
    pub count: u64,
}

impl AssocRule {
    pub fn display(&self, catalog: &ItemCatalog) -> String {
        let items: Vec<String> = self
            .antecedent
            .iter()
            .map(|&i| catalog.items[i as usize].display())
            .collect();
        format!(
            "{{{}}} => {} (support {:.7}, confidence {:.7}, lift {:.6}, count {})",
            items.join(", "),
            self.consequent.name(),
            self.support,
            self.confidence,
            self.lift,
            self.count
        )
    }

    pub fn to_condition(&self, catalog: &ItemCatalog) -> Result<Condition> {
        let mut atoms = Vec::new();
        for &id in &self.antecedent {
            match &catalog.items[id as usize] {
                ItemDef::Bin { feature, lo, hi, .. } => {
                    if let Some(a) = lo {
                        atoms.push(Atom::ge(*feature, *a));
                    }
                    if let Some(b) = hi {
                        atoms.push(Atom::lt(*feature, *b));
                    }
                }
                ItemDef::SteelLevel(s) => atoms.push(Atom::steel(*s)),
                ItemDef::Fault(_) => {
                    return Err(Error::InvalidParam("fault item in antecedent".into()))
                }
            }
        }
        Condition::from_atoms(&atoms)
    }
}

fn rule_sort_key(a: &AssocRule, b: &AssocRule) -> std::cmp::Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(b.lift.total_cmp(&a.lift))
        .then(b.count.cmp(&a.count))
        .then(a.antecedent.cmp(&b.antecedent))
        .then(a.consequent.index().cmp(&b.consequent.index()))
}

fn validate(cfg: &AssocConfig) -> Result<()> {
    if !(cfg.min_support > 0.0 && cfg.min_support <= 1.0) {
        return Err(Error::InvalidParam("min_support must be in (0, 1]".into()));
    }
    if !(cfg.min_confidence > 0.0 && cfg.min_confidence <= 1.0) {
        return Err(Error::InvalidParam("min_confidence must be in (0, 1]".into()));
    }
    if cfg.max_len < 2 {
        return Err(Error::InvalidParam("max_len must be >= 2".into()));
    }
    Ok(())
}

fn n_faults(catalog: &ItemCatalog, items: &[u32]) -> usize {
    items.iter().filter(|&&i| catalog.is_fault(i)).count()
}

/// Classic level-wise apriori over the transaction bitsets, restricted
/// to itemsets with at most one fault item; rules are oriented with the
/// fault as consequent and sorted by confidence, lift, then count,
/// all descending.
pub fn apriori_mine(tt: &TransactionTable, cfg: &AssocConfig) -> Result<Vec<AssocRule>> {
    validate(cfg)?;
    let n = tt.n as f64;
    let n_items = tt.catalog.items.len() as u32;
    let frequent_count = |count: u64| count as f64 / n >= cfg.min_support;

    let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
    let mut level: Vec<(Vec<u32>, Vec<u64>, u64)> = Vec::new();
    for item in 0..n_items {
        let c = tt.item_count(item);
        if frequent_count(c) {
            counts.insert(vec![item], c);
            level.push((vec![item], tt.tidsets[item as usize].clone(), c));
        }
    }

    let mut all_frequent: Vec<(Vec<u32>, u64)> =
        level.iter().map(|(i, _, c)| (i.clone(), *c)).collect();

    for _size in 2..=cfg.max_len {
        let mut candidates: Vec<(Vec<u32>, usize, u32)> = Vec::new();
        let mut g = 0;
        while g < level.len() {
            let prefix = &level[g].0[..level[g].0.len() - 1];
            let mut h = g + 1;
            while h < level.len() && &level[h].0[..level[h].0.len() - 1] == prefix {
                h += 1;
            }
            for i in g..h {
                for j in (i + 1)..h {
                    let a = &level[i].0;
                    let b = &level[j].0;
                    let mut cand = a.clone();
                    cand.push(b[b.len() - 1]);
                    if n_faults(&tt.catalog, &cand) > 1 {
                        continue;
                    }
                    let mut all_subsets_frequent = true;
                    let mut sub = Vec::with_capacity(cand.len() - 1);
                    for drop in 0..cand.len().saturating_sub(2) {
                        sub.clear();
                        sub.extend(
                            cand.iter()
                                .enumerate()
                                .filter(|&(k, _)| k != drop)
                                .map(|(_, &v)| v),
                        );
                        if !counts.contains_key(&sub) {
                            all_subsets_frequent = false;
                            break;
                        }
                    }
                    if all_subsets_frequent {
                        candidates.push((cand, i, b[b.len() - 1]));
                    }
                }
            }
            g = h;
        }
        let counted: Vec<(Vec<u32>, Vec<u64>, u64)> = candidates
            .into_par_iter()
            .filter_map(|(cand, parent, new_item)| {
                let tidset = tt.tidset_with(&level[parent].1, new_item);
                let c: u64 = tidset.iter().map(|w| w.count_ones() as u64).sum();
                frequent_count(c).then(|| (cand, tidset, c))
            })
            .collect();
        if counted.is_empty() {
            break;
        }
        for (items, _, c) in &counted {
            counts.insert(items.clone(), *c);
            all_frequent.push((items.clone(), *c));
        }
        level = counted;
    }

    let mut rules = Vec::new();
    for (items, count) in &all_frequent {
        if items.len() < 2 || n_faults(&tt.catalog, items) != 1 {
            continue;
        }
        let fault_item = *items.last().unwrap();
        debug_assert!(tt.catalog.is_fault(fault_item));
        let antecedent: Vec<u32> = items[..items.len() - 1].to_vec();
        let count_a = counts[&antecedent];
        let confidence = *count as f64 / count_a as f64;
        if confidence < cfg.min_confidence {
            continue;
        }
        let count_c = tt.item_count(fault_item);
        rules.push(AssocRule {
            antecedent,
            consequent: tt.catalog.fault_of(fault_item).unwrap(),
            support: *count as f64 / n,
            confidence,
            lift: confidence * n / count_c as f64,
            count: *count,
        });
    }
    rules.sort_by(rule_sort_key);
    Ok(rules)
}

/// Naive reference miner: enumerates every itemset up to `max_len` with
/// at most one fault item by scanning transactions directly. Used to
/// validate the level-wise implementation on small inputs.
pub fn reference_mine(tt: &TransactionTable, cfg: &AssocConfig) -> Result<Vec<AssocRule>> {
    validate(cfg)?;
    let n = tt.n as f64;
    let n_items = tt.catalog.items.len();
    let scan = |items: &[u32]| -> u64 {
        tt.row_items
            .iter()
            .filter(|row| items.iter().all(|i| row.binary_search(i).is_ok()))
            .count() as u64
    };
    let mut rules = Vec::new();
    let mut stack: Vec<Vec<u32>> = (0..n_items as u32).map(|i| vec![i]).collect();
    while let Some(items) = stack.pop() {
        let count = scan(&items);
        if (count as f64 / n) < cfg.min_support {
            continue;
        }
        if items.len() < cfg.max_len {
            let last = *items.last().unwrap();
            for next in (last + 1)..n_items as u32 {
                let mut ext = items.clone();
                ext.push(next);
                if n_faults(&tt.catalog, &ext) <= 1 {
                    stack.push(ext);
                }
            }
        }
        if items.len() >= 2 && n_faults(&tt.catalog, &items) == 1 {
            let fault_item = *items.last().unwrap();
            if !tt.catalog.is_fault(fault_item) {
                continue;
            }
            let antecedent: Vec<u32> = items[..items.len() - 1].to_vec();
            let count_a = scan(&antecedent);
            let confidence = count as f64 / count_a as f64;
            if confidence >= cfg.min_confidence {
                let count_c = scan(&[fault_item]);
                rules.push(AssocRule {
                    antecedent,
                    consequent: tt.catalog.fault_of(fault_item).unwrap(),
                    support: count as f64 / n,
                    confidence,
                    lift: confidence * n / count_c as f64,
                    count,
                });
            }
        }
    }
    rules.sort_by(rule_sort_key);
    Ok(rules)
}

/// Keeps at most `top_k` rules per fault class among those with
/// antecedent length at most `max_ant_len`, preserving order.
pub fn filter_rules(rules: &[AssocRule], top_k: usize, max_ant_len: usize) -> Vec<AssocRule> {
    let mut per_class = [0usize; N_CLASSES];
    let mut out = Vec::new();
    for rule in rules {
        if rule.antecedent.len() > max_ant_len {
            continue;
        }
        let c = rule.consequent.index();
        if per_class[c] < top_k {
            per_class[c] += 1;
            out.push(rule.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Row;

    fn uniform_table(values: Vec<f64>, label: FaultLabel) -> FaultTable {
        let rows: Vec<Row> = values
            .iter()
            .map(|&v| {
                let mut r = [0.0; N_FEATURES];
                r[0] = v;
                r
            })
            .collect();
        FaultTable { rows, labels: vec![label; values.len()] }
    }

    #[test]
    fn quantile_cuts_match_hand_oracle() {
        let values: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let t = uniform_table(values, FaultLabel::Bumps);
        let (disc, _) = discretize(&t, 4).unwrap();
        assert_eq!(disc.cuts[0], vec![25.5, 50.5, 75.5]);
        assert_eq!(disc.n_bins(0), 4);
        assert_eq!(disc.bin_of(0, 25.0), 0);
        assert_eq!(disc.bin_of(0, 25.5), 1);
        assert_eq!(disc.bin_of(0, 100.0), 3);
    }

    #[test]
    fn constant_column_single_interval() {
        let t = uniform_table(vec![3.0; 10], FaultLabel::Stains);
        let (disc, tt) = discretize(&t, 4).unwrap();
        assert!(disc.cuts[0].is_empty());
        assert!(disc.reduced.contains(&0));
        assert_eq!(disc.bin_of(0, -1e9), 0);
        assert_eq!(disc.bin_of(0, 1e9), 0);
        assert_eq!(tt.row_items[0].len(), tt.items_per_row());
    }

    #[test]
    fn every_row_has_27_items() {
        let values: Vec<f64> = (0..50).map(|i| (i % 9) as f64).collect();
        let t = uniform_table(values, FaultLabel::Pastry);
        let (_, tt) = discretize(&t, 5).unwrap();
        for row in &tt.row_items {
            assert_eq!(row.len(), 27);
            assert!(row.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(n_faults(&tt.catalog, row), 1);
        }
    }

    #[test]
    fn identical_transactions_mine_perfect_rule() {
        let t = uniform_table(vec![5.0, 5.0], FaultLabel::Dirtiness);
        let (_, tt) = discretize(&t, 2).unwrap();
        let cfg = AssocConfig { bins: 2, min_support: 0.5, min_confidence: 0.9, max_len: 2 };
        let rules = apriori_mine(&tt, &cfg).unwrap();
        assert!(!rules.is_empty());
        for r in &rules {
            assert_eq!(r.consequent, FaultLabel::Dirtiness);
            assert_eq!(r.support, 1.0);
            assert_eq!(r.confidence, 1.0);
            assert_eq!(r.lift, 1.0);
            assert_eq!(r.count, 2);
        }
    }

    fn small_random_table(seed: u64, n: usize) -> FaultTable {
        use rand::Rng;
        let mut rng = crate::rng::stage_rng(seed, "assoc-test");
        let rows: Vec<Row> = (0..n)
            .map(|_| {
                let mut r = [0.0; N_FEATURES];
                r[0] = (rng.random_range(0..4u8)) as f64;
                r[5] = (rng.random_range(0..3u8)) as f64;
                r[STEEL_FEATURE] = rng.random_range(0..2u8) as f64;
                r
            })
            .collect();
        let labels = (0..n)
            .map(|_| FaultLabel::ALL[rng.random_range(0..3usize)])
            .collect();
        FaultTable { rows, labels }
    }

    #[test]
    fn apriori_matches_reference_miner() {
        for seed in 0..3 {
            let t = small_random_table(seed, 120);
            let (_, tt) = discretize(&t, 3).unwrap();
            let cfg = AssocConfig { bins: 3, min_support: 0.05, min_confidence: 0.3, max_len: 4 };
            let fast = apriori_mine(&tt, &cfg).unwrap();
            let slow = reference_mine(&tt, &cfg).unwrap();
            assert_eq!(fast, slow, "seed {seed}");
            assert!(!fast.is_empty(), "seed {seed} produced no rules");
        }
    }

    #[test]
    fn emitted_rules_satisfy_thresholds_and_lift_identity() {
        let t = small_random_table(9, 150);
        let (_, tt) = discretize(&t, 3).unwrap();
        let cfg = AssocConfig { bins: 3, min_support: 0.05, min_confidence: 0.25, max_len: 3 };
        let rules = apriori_mine(&tt, &cfg).unwrap();
        assert!(!rules.is_empty());
        for r in &rules {
            assert!(r.support >= cfg.min_support);
            assert!(r.confidence >= cfg.min_confidence);
            assert!(r.support <= r.confidence + 1e-15);
            let count_c = tt.item_count(tt.catalog.fault_item(r.consequent));
            assert_eq!(r.lift, r.confidence * tt.n as f64 / count_c as f64);
            assert_eq!(r.count, (r.support * tt.n as f64).round() as u64);
        }
        for w in rules.windows(2) {
            assert!(rule_sort_key(&w[0], &w[1]) != std::cmp::Ordering::Greater);
        }
    }

    #[test]
    fn filter_caps_per_class_and_length() {
        let t = small_random_table(4, 150);
        let (_, tt) = discretize(&t, 3).unwrap();
        let cfg = AssocConfig { bins: 3, min_support: 0.02, min_confidence: 0.2, max_len: 4 };
        let rules = apriori_mine(&tt, &cfg).unwrap();
        let filtered = filter_rules(&rules, 2, 2);
        let mut per_class = [0usize; N_CLASSES];
        for r in &filtered {
            per_class[r.consequent.index()] += 1;
            assert!(r.antecedent.len() <= 2);
        }
        assert!(per_class.iter().all(|&c| c <= 2));
        assert!(filter_rules(&rules, 0, 5).is_empty());
    }

    #[test]
    fn bad_config_rejected() {
        let t = uniform_table(vec![1.0, 2.0], FaultLabel::Bumps);
        let (_, tt) = discretize(&t, 2).unwrap();
        let bad_support = AssocConfig { min_support: 0.0, ..AssocConfig::default() };
        assert!(apriori_mine(&tt, &bad_support).is_err());
        let bad_len = AssocConfig { max_len: 1, ..AssocConfig::default() };
        assert!(apriori_mine(&tt, &bad_len).is_err());
        assert!(discretize(&t, 1).is_err());
    }

    #[test]
    fn rule_converts_to_condition() {
        let values: Vec<f64> = (0..60).map(|i| (i % 6) as f64).collect();
        let t = uniform_table(values, FaultLabel::KScratch);
        let (_, tt) = discretize(&t, 3).unwrap();
        let cfg = AssocConfig { bins: 3, min_support: 0.1, min_confidence: 0.9, max_len: 2 };
        let rules = apriori_mine(&tt, &cfg).unwrap();
        let with_bin = rules
            .iter()
            .find(|r| {
                r.antecedent.iter().any(|&i| {
                    matches!(tt.catalog.items[i as usize], ItemDef::Bin { lo: Some(_), .. })
                })
            })
            .unwrap();
        let cond = with_bin.to_condition(&tt.catalog).unwrap();
        let covered = t.rows.iter().filter(|r| cond.matches(r)).count() as u64;
        assert_eq!(covered, scan_count(&tt, &with_bin.antecedent));
    }

    fn scan_count(tt: &TransactionTable, items: &[u32]) -> u64 {
        tt.row_items
            .iter()
            .filter(|row| items.iter().all(|i| row.binary_search(i).is_ok()))
            .count() as u64
    }
}
