//! Rule-table classifier with forest fallback: curated rules from the
//! forest, association mining, and hand-entered insight files fuse into
//! one priority-ordered table; rows no rule matches fall through to the
//! forest.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, FoldPlan};
use crate::forest::{train_forest, ForestModel, ForestParams};
use crate::model::Model;
use crate::rng::sub_rng;
use crate::rules::assoc::{apriori_mine, discretize, AssocConfig, AssocRule, ItemCatalog};
use crate::rules::condition::{Atom, Condition};
use crate::rules::forest::{harvest_pruned, ForestRule};
use crate::schema::{feature_index, FaultLabel, Row, Steel, N_CLASSES};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Rule origin; earlier variants win priority ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Forest,
    Assoc,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledRule {
    pub condition: Condition,
    pub consequent: FaultLabel,
    pub confidence: f64,
    pub lift: f64,
    pub provenance: Provenance,
    pub label: String,
}

impl CompiledRule {
    pub fn from_forest_rule(rule: &ForestRule, class_share: f64, index: usize) -> CompiledRule {
        let confidence = 1.0 - rule.err;
        CompiledRule {
            condition: rule.condition.clone(),
            consequent: rule.prediction,
            confidence,
            lift: if class_share > 0.0 { confidence / class_share } else { 0.0 },
            provenance: Provenance::Forest,
            label: format!("forest-{index}"),
        }
    }

    pub fn from_assoc_rule(
        rule: &AssocRule,
        catalog: &ItemCatalog,
        index: usize,
    ) -> Result<CompiledRule> {
        Ok(CompiledRule {
            condition: rule.to_condition(catalog)?,
            consequent: rule.consequent,
            confidence: rule.confidence,
            lift: rule.lift,
            provenance: Provenance::Assoc,
            label: format!("assoc-{index}"),
        })
    }
}

/// Hand-entered rule row as read from a JSON insight file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManualRule {
    pub when: BTreeMap<String, ManualSlot>,
    pub then: String,
    pub confidence: f64,
    #[serde(default)]
    pub lift: f64,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ManualSlot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub le: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steel: Option<String>,
}

pub fn compile_manual(rules: &[ManualRule]) -> Result<Vec<CompiledRule>> {
    rules
        .iter()
        .enumerate()
        .map(|(index, m)| {
            let mut atoms = Vec::new();
            for (name, slot) in &m.when {
                let feature = feature_index(name)
                    .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
                if let Some(b) = slot.le {
                    atoms.push(Atom::le(feature, b));
                }
                if let Some(b) = slot.lt {
                    atoms.push(Atom::lt(feature, b));
                }
                if let Some(a) = slot.ge {
                    atoms.push(Atom::ge(feature, a));
                }
                if let Some(a) = slot.gt {
                    atoms.push(Atom::gt(feature, a));
                }
                if let Some(level) = &slot.steel {
                    let steel = match level.as_str() {
                        "A300" => Steel::A300,
                        "A400" => Steel::A400,
                        other => return Err(Error::UnknownFeature(format!("steel level {other}"))),
                    };
                    atoms.push(Atom::steel(steel));
                }
            }
            Ok(CompiledRule {
                condition: Condition::from_atoms(&atoms)?,
                consequent: FaultLabel::from_name(&m.then)
                    .ok_or_else(|| Error::UnknownLabel(m.then.clone()))?,
                confidence: m.confidence,
                lift: m.lift,
                provenance: Provenance::Manual,
                label: format!("manual-{index}"),
            })
        })
        .collect()
}

/// Priority-ordered rule rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<CompiledRule>,
}

/// Sorts rules into match priority: confidence, then lift (both
/// descending), then fewer constrained slots, then provenance
/// (forest before assoc before manual), then input order. Rules with no
/// constrained feature are rejected.
pub fn compile_rule_table(rules: Vec<CompiledRule>) -> Result<RuleTable> {
    for rule in &rules {
        if rule.condition.is_empty() {
            return Err(Error::InvalidParam(format!(
                "rule {} has only wildcard slots",
                rule.label
            )));
        }
    }
    let mut decorated: Vec<(usize, CompiledRule)> = rules.into_iter().enumerate().collect();
    decorated.sort_by(|(ia, a), (ib, b)| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.lift.total_cmp(&a.lift))
            .then(a.condition.len().cmp(&b.condition.len()))
            .then(a.provenance.cmp(&b.provenance))
            .then(ia.cmp(ib))
    });
    Ok(RuleTable { rules: decorated.into_iter().map(|(_, r)| r).collect() })
}

/// Which path produced a prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Rule { index: usize, label: String },
    Fallback,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub table: RuleTable,
    pub fallback: ForestModel,
}

impl EnsembleModel {
    pub fn predict_explained(&self, row: &Row) -> (FaultLabel, Decision) {
        for (index, rule) in self.table.rules.iter().enumerate() {
            if rule.condition.matches(row) {
                return (
                    rule.consequent,
                    Decision::Rule { index, label: rule.label.clone() },
                );
            }
        }
        (self.fallback.predict(row), Decision::Fallback)
    }

    pub fn predict(&self, row: &Row) -> FaultLabel {
        match self.table.rules.iter().find(|r| r.condition.matches(row)) {
            Some(rule) => rule.consequent,
            None => self.fallback.predict(row),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FireCounts {
    pub per_rule: Vec<u64>,
    pub fallback: u64,
}

/// Predicts every row, tallying which rule fired (or the fallback) per
/// row.
pub fn predict_all(model: &EnsembleModel, rows: &[Row]) -> (Vec<FaultLabel>, FireCounts) {
    let decided: Vec<(FaultLabel, Option<usize>)> = rows
        .par_iter()
        .map(|row| match model.predict_explained(row) {
            (l, Decision::Rule { index, .. }) => (l, Some(index)),
            (l, Decision::Fallback) => (l, None),
        })
        .collect();
    let mut counts = FireCounts {
        per_rule: vec![0; model.table.rules.len()],
        fallback: 0,
    };
    let mut labels = Vec::with_capacity(rows.len());
    for (label, fired) in decided {
        match fired {
            Some(i) => counts.per_rule[i] += 1,
            None => counts.fallback += 1,
        }
        labels.push(label);
    }
    (labels, counts)
}

/// Rule-mining settings for ensemble evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningConfig {
    pub forest: ForestParams,
    pub rule_depth: usize,
    pub delta: f64,
    pub min_cover: usize,
    pub max_err: f64,
    pub use_assoc: bool,
    pub assoc: AssocConfig,
    pub assoc_min_confidence: f64,
    pub assoc_top_k: usize,
    #[serde(default)]
    pub manual: Vec<ManualRule>,
    pub mine_on_full: bool,
}

impl MiningConfig {
    /// Leakage-free default: rules mined inside each training fold.
    /// Shallow perfect rules generalize; the fallback handles the rest.
    pub fn per_fold(seed: u64) -> MiningConfig {
        MiningConfig {
            forest: ForestParams::tuned(seed),
            rule_depth: 4,
            delta: 0.0,
            min_cover: 400,
            max_err: 0.0,
            use_assoc: false,
            assoc: AssocConfig::default(),
            assoc_min_confidence: 1.0,
            assoc_top_k: 10,
            manual: Vec::new(),
            mine_on_full: false,
        }
    }

    /// Mines one rule set on the full table before cross-validation,
    /// trading leakage for coverage. Deeper, looser harvesting pushes
    /// rule coverage toward every row.
    pub fn full_data(seed: u64) -> MiningConfig {
        MiningConfig {
            forest: ForestParams::tuned(seed),
            rule_depth: 10,
            delta: 0.0,
            min_cover: 5,
            max_err: 0.25,
            use_assoc: true,
            assoc: AssocConfig::default(),
            assoc_min_confidence: 0.9,
            assoc_top_k: 10,
            manual: Vec::new(),
            mine_on_full: true,
        }
    }
}

fn class_shares(table: &FaultTable) -> Result<[f64; N_CLASSES]> {
    let counts = table.class_counts()?;
    let n = table.len() as f64;
    let mut out = [0.0; N_CLASSES];
    for c in 0..N_CLASSES {
        out[c] = counts[c] as f64 / n;
    }
    Ok(out)
}

/// Mines and compiles the rule table for one training table using an
/// already-trained forest on that table.
fn mine_rules_for(
    forest: &ForestModel,
    table: &FaultTable,
    cfg: &MiningConfig,
) -> Result<Vec<CompiledRule>> {
    let shares = class_shares(table)?;
    let pruned = harvest_pruned(forest, table, cfg.rule_depth, cfg.delta)?;
    let mut compiled = Vec::new();
    for rule in pruned
        .iter()
        .filter(|r| r.n_covered >= cfg.min_cover && r.err <= cfg.max_err)
    {
        let share = shares[rule.prediction.index()];
        compiled.push(CompiledRule::from_forest_rule(rule, share, compiled.len()));
    }
    if cfg.use_assoc {
        let (_, tt) = discretize(table, cfg.assoc.bins)?;
        let mined = apriori_mine(&tt, &cfg.assoc)?;
        let mut per_class = [0usize; N_CLASSES];
        let mut kept = 0;
        for rule in &mined {
            if rule.confidence < cfg.assoc_min_confidence {
                continue;
            }
            let c = rule.consequent.index();
            if per_class[c] >= cfg.assoc_top_k {
                continue;
            }
            per_class[c] += 1;
            compiled.push(CompiledRule::from_assoc_rule(rule, &tt.catalog, kept)?);
            kept += 1;
        }
    }
    compiled.extend(compile_manual(&cfg.manual)?);
    Ok(compiled)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class_error: [f64; N_CLASSES],
    pub rules_fired: u64,
    pub fallback_fired: u64,
    pub fold_rule_counts: Vec<usize>,
    pub forest_accuracy: f64,
    pub mine_on_full: bool,
}

/// Cross-validates the rule-plus-fallback classifier. Each fold trains
/// its own fallback forest; rules are mined per fold by default or once
/// on the full table with `mine_on_full`. The plain forest is scored on
/// the same folds for comparison.
pub fn evaluate_ensemble(
    table: &FaultTable,
    plan: &FoldPlan,
    cfg: &MiningConfig,
) -> Result<EnsembleReport> {
    let full_rules = if cfg.mine_on_full {
        let mut params = cfg.forest;
        params.seed = sub_rng(cfg.forest.seed, "ensemble-full", 0).random();
        let forest = train_forest(table, &params)?;
        Some(mine_rules_for(&forest, table, cfg)?)
    } else {
        None
    };
    let per_fold: Vec<Result<(ConfusionMatrix, ConfusionMatrix, u64, u64, usize)>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(fold, test_idx)| {
            let train = table.subset(&plan.train_indices(fold));
            let mut params = cfg.forest;
            params.seed = sub_rng(cfg.forest.seed, "cv-fold", fold as u64).random();
            let fallback = train_forest(&train, &params)?;
            let compiled = match &full_rules {
                Some(rules) => rules.clone(),
                None => mine_rules_for(&fallback, &train, cfg)?,
            };
            let n_rules = compiled.len();
            let model = EnsembleModel { table: compile_rule_table(compiled)?, fallback };
            let mut cm = ConfusionMatrix::default();
            let mut forest_cm = ConfusionMatrix::default();
            let mut rules_fired = 0;
            let mut fallback_fired = 0;
            for &i in test_idx {
                let (label, decision) = model.predict_explained(&table.rows[i]);
                match decision {
                    Decision::Rule { .. } => rules_fired += 1,
                    Decision::Fallback => fallback_fired += 1,
                }
                cm.record(table.labels[i], label);
                forest_cm.record(table.labels[i], model.fallback.predict(&table.rows[i]));
            }
            Ok((cm, forest_cm, rules_fired, fallback_fired, n_rules))
        })
        .collect();
    let mut confusion = ConfusionMatrix::default();
    let mut forest_confusion = ConfusionMatrix::default();
    let mut rules_fired = 0;
    let mut fallback_fired = 0;
    let mut fold_rule_counts = Vec::with_capacity(plan.n_folds);
    for fold in per_fold {
        let (cm, fcm, rf, ff, nr) = fold?;
        confusion.merge(&cm);
        forest_confusion.merge(&fcm);
        rules_fired += rf;
        fallback_fired += ff;
        fold_rule_counts.push(nr);
    }
    Ok(EnsembleReport {
        accuracy: confusion.accuracy(),
        per_class_error: confusion.per_class_error(),
        confusion,
        rules_fired,
        fallback_fired,
        fold_rule_counts,
        forest_accuracy: forest_confusion.accuracy(),
        mine_on_full: cfg.mine_on_full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::N_FEATURES;

    fn toy_table(per_class: usize) -> FaultTable {
        // Every feature separates the classes, so trees split regardless of
        // which candidate features a node draws.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &label) in FaultLabel::ALL.iter().enumerate() {
            for i in 0..per_class {
                let mut r = [0.0; N_FEATURES];
                for (f, v) in r.iter_mut().enumerate() {
                    *v = (c * (f + 1)) as f64 + (i % 3) as f64 * 0.1;
                }
                r[crate::schema::STEEL_FEATURE] = (c % 2) as f64;
                rows.push(r);
                labels.push(label);
            }
        }
        FaultTable { rows, labels }
    }

    fn toy_forest(table: &FaultTable, seed: u64) -> ForestModel {
        let params = ForestParams { n_trees: 12, mtry: 3, min_node_size: 1, seed };
        train_forest(table, &params).unwrap()
    }

    fn rule(cond: Condition, fault: FaultLabel, conf: f64, lift: f64, label: &str) -> CompiledRule {
        CompiledRule {
            condition: cond,
            consequent: fault,
            confidence: conf,
            lift,
            provenance: Provenance::Manual,
            label: label.into(),
        }
    }

    #[test]
    fn priority_orders_by_confidence_then_lift_then_length() {
        let c1 = Condition::from_atoms(&[Atom::le(0, 5.0)]).unwrap();
        let c2 = Condition::from_atoms(&[Atom::le(0, 5.0), Atom::gt(4, 1.0)]).unwrap();
        let rules = vec![
            rule(c2.clone(), FaultLabel::Bumps, 0.8, 2.0, "low-conf"),
            rule(c1.clone(), FaultLabel::Stains, 0.9, 1.0, "high-conf"),
            rule(c2.clone(), FaultLabel::Pastry, 0.9, 3.0, "high-lift"),
            rule(c1.clone(), FaultLabel::Dirtiness, 0.9, 3.0, "short"),
        ];
        let table = compile_rule_table(rules).unwrap();
        let labels: Vec<&str> = table.rules.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["short", "high-lift", "high-conf", "low-conf"]);
    }

    #[test]
    fn provenance_breaks_remaining_ties_then_input_order() {
        let c = Condition::from_atoms(&[Atom::le(0, 5.0)]).unwrap();
        let mut manual = rule(c.clone(), FaultLabel::Bumps, 0.9, 1.0, "manual");
        manual.provenance = Provenance::Manual;
        let mut assoc = rule(c.clone(), FaultLabel::Bumps, 0.9, 1.0, "assoc");
        assoc.provenance = Provenance::Assoc;
        let mut forest = rule(c.clone(), FaultLabel::Bumps, 0.9, 1.0, "forest");
        forest.provenance = Provenance::Forest;
        let mut forest2 = rule(c, FaultLabel::Bumps, 0.9, 1.0, "forest2");
        forest2.provenance = Provenance::Forest;
        let table = compile_rule_table(vec![manual, assoc, forest, forest2]).unwrap();
        let labels: Vec<&str> = table.rules.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["forest", "forest2", "assoc", "manual"]);
    }

    #[test]
    fn all_wildcard_rule_rejected() {
        let empty = Condition::default();
        let r = rule(empty, FaultLabel::Bumps, 1.0, 1.0, "bad");
        assert!(compile_rule_table(vec![r]).is_err());
    }

    #[test]
    fn manual_rules_validate_features_and_labels() {
        let good: Vec<ManualRule> = serde_json::from_str(
            r#"[{"when": {"Steel_Plate_Thickness": {"le": 60.0}, "TypeOfSteel": {"steel": "A300"}},
                 "then": "Bumps", "confidence": 0.7, "lift": 1.2, "note": "thin plates"}]"#,
        )
        .unwrap();
        let compiled = compile_manual(&good).unwrap();
        assert_eq!(compiled.len(), 1);
        assert_eq!(compiled[0].consequent, FaultLabel::Bumps);
        assert_eq!(compiled[0].condition.len(), 2);
        let bad_feature: Vec<ManualRule> = serde_json::from_str(
            r#"[{"when": {"NoSuchColumn": {"le": 1.0}}, "then": "Bumps", "confidence": 0.5}]"#,
        )
        .unwrap();
        assert!(matches!(compile_manual(&bad_feature), Err(Error::UnknownFeature(_))));
        let bad_label: Vec<ManualRule> = serde_json::from_str(
            r#"[{"when": {"X_Minimum": {"le": 1.0}}, "then": "NoFault", "confidence": 0.5}]"#,
        )
        .unwrap();
        assert!(matches!(compile_manual(&bad_label), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn empty_rule_table_equals_fallback_forest() {
        let t = toy_table(8);
        let forest = toy_forest(&t, 3);
        let model = EnsembleModel { table: RuleTable::default(), fallback: forest };
        let (labels, counts) = predict_all(&model, &t.rows);
        for (i, row) in t.rows.iter().enumerate() {
            assert_eq!(labels[i], model.fallback.predict(row));
        }
        assert_eq!(counts.fallback, t.len() as u64);
        assert_eq!(counts.per_rule.len(), 0);
    }

    #[test]
    fn all_covering_rule_decides_everything() {
        let t = toy_table(6);
        let forest = toy_forest(&t, 4);
        let cover = Condition::from_atoms(&[Atom::le(0, 1e12)]).unwrap();
        let table =
            compile_rule_table(vec![rule(cover, FaultLabel::Stains, 1.0, 1.0, "all")]).unwrap();
        let model = EnsembleModel { table, fallback: forest };
        let (labels, counts) = predict_all(&model, &t.rows);
        assert!(labels.iter().all(|&l| l == FaultLabel::Stains));
        assert_eq!(counts.per_rule, vec![t.len() as u64]);
        assert_eq!(counts.fallback, 0);
    }

    #[test]
    fn higher_priority_rule_wins_overlap() {
        let t = toy_table(4);
        let forest = toy_forest(&t, 5);
        let wide = Condition::from_atoms(&[Atom::le(0, 100.0)]).unwrap();
        let narrow = Condition::from_atoms(&[Atom::le(0, 100.0), Atom::le(4, 100.0)]).unwrap();
        let table = compile_rule_table(vec![
            rule(narrow, FaultLabel::Pastry, 0.7, 1.0, "narrow"),
            rule(wide, FaultLabel::ZScratch, 0.95, 1.0, "wide"),
        ])
        .unwrap();
        let model = EnsembleModel { table, fallback: forest };
        let (label, decision) = model.predict_explained(&t.rows[0]);
        assert_eq!(label, FaultLabel::ZScratch);
        assert_eq!(decision, Decision::Rule { index: 0, label: "wide".into() });
    }

    #[test]
    fn coverage_partition_is_exact() {
        let t = toy_table(7);
        let forest = toy_forest(&t, 6);
        let half = Condition::from_atoms(&[Atom::le(0, 2.95)]).unwrap();
        let table = compile_rule_table(vec![rule(half, FaultLabel::Bumps, 0.9, 1.0, "half")]).unwrap();
        let model = EnsembleModel { table, fallback: forest };
        let (_, counts) = predict_all(&model, &t.rows);
        let fired: u64 = counts.per_rule.iter().sum();
        assert_eq!(fired + counts.fallback, t.len() as u64);
        assert!(fired > 0);
        assert!(counts.fallback > 0);
    }

    #[test]
    fn zero_error_rule_never_hurts_training_accuracy() {
        let t = toy_table(6);
        let forest = toy_forest(&t, 7);
        let base = EnsembleModel { table: RuleTable::default(), fallback: forest };
        let (before, _) = predict_all(&base, &t.rows);
        let acc_before = before
            .iter()
            .zip(&t.labels)
            .filter(|(a, b)| a == b)
            .count();
        let zero_err = Condition::from_atoms(&[Atom::le(0, 0.5)]).unwrap();
        let covered_majority = FaultLabel::ALL[0];
        let with_rule = EnsembleModel {
            table: compile_rule_table(vec![rule(
                zero_err,
                covered_majority,
                1.0,
                7.0,
                "perfect",
            )])
            .unwrap(),
            fallback: base.fallback,
        };
        let (after, _) = predict_all(&with_rule, &t.rows);
        let acc_after = after.iter().zip(&t.labels).filter(|(a, b)| a == b).count();
        assert!(acc_after >= acc_before);
    }

    #[test]
    fn evaluate_ensemble_runs_and_tracks_forest() {
        let t = toy_table(12);
        let plan = FoldPlan::stratified(&t.labels, 10, 1).unwrap();
        let mut cfg = MiningConfig::per_fold(1);
        cfg.forest = ForestParams { n_trees: 12, mtry: 3, min_node_size: 1, seed: 1 };
        cfg.rule_depth = 3;
        cfg.min_cover = 5;
        cfg.use_assoc = false;
        let report = evaluate_ensemble(&t, &plan, &cfg).unwrap();
        assert_eq!(
            report.rules_fired + report.fallback_fired,
            t.len() as u64
        );
        assert_eq!(report.fold_rule_counts.len(), 10);
        assert!(report.accuracy >= report.forest_accuracy - 0.05);
        assert!(report.accuracy > 0.5);
        let again = evaluate_ensemble(&t, &plan, &cfg).unwrap();
        assert_eq!(report.accuracy, again.accuracy);
        assert_eq!(report.rules_fired, again.rules_fired);
    }
}
