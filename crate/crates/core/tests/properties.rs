//! Randomized cross-module invariants.

use proptest::prelude::*;
use proptest::strategy::Strategy;
use rand::Rng;
use steelfault::explain::breakdown::breakdown;
use steelfault::rng::stage_rng;
use steelfault::rules::{
    apriori_mine, discretize, reference_mine, score_and_select, Atom, Condition, ForestRule,
    Rel,
};
use steelfault::balance::Strategy as Balancing;
use steelfault::tree::gini;
use steelfault::*;

const GEN_CLASSES: usize = 4;

/// Deterministic random table: per-class sizes from the strategy, row
/// contents from a seeded stream. `spread` scales the value range.
fn build_table(sizes: &[usize], seed: u64, spread: f64) -> FaultTable {
    let mut rng = stage_rng(seed, "prop-table");
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let mut r = [0.0; N_FEATURES];
            for (f, v) in r.iter_mut().enumerate() {
                *v = c as f64 + rng.random::<f64>() * spread + f as f64 * 0.01;
            }
            r[STEEL_FEATURE] = f64::from(rng.random::<bool>());
            rows.push(r);
            labels.push(FaultLabel::ALL[c]);
        }
    }
    FaultTable { rows, labels }
}

fn class_sizes() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(7usize..20, GEN_CLASSES)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn balancing_equalizes_class_counts(sizes in class_sizes(), seed in any::<u64>()) {
        let table = build_table(&sizes, seed, 4.0);
        let lo = *sizes.iter().min().unwrap() as u32;
        let hi = *sizes.iter().max().unwrap() as u32;
        for (strategy, target) in [
            (Balancing::Undersample, lo),
            (Balancing::Oversample, hi),
            (Balancing::Smote, hi),
        ] {
            let bal = balance(&table, &BalanceConfig::new(strategy, seed)).unwrap();
            let counts = bal.table.class_counts().unwrap();
            for c in 0..GEN_CLASSES {
                prop_assert_eq!(counts[c], target);
            }
            for c in GEN_CLASSES..N_CLASSES {
                prop_assert_eq!(counts[c], 0);
            }
            prop_assert_eq!(bal.provenance.len(), bal.table.len());
        }
    }

    #[test]
    fn smote_rows_interpolate_within_class(sizes in class_sizes(), seed in any::<u64>()) {
        let table = build_table(&sizes, seed, 4.0);
        let bal = balance(&table, &BalanceConfig::new(Balancing::Smote, seed)).unwrap();
        let mut lo = [[f64::INFINITY; N_FEATURES]; GEN_CLASSES];
        let mut hi = [[f64::NEG_INFINITY; N_FEATURES]; GEN_CLASSES];
        for (row, &label) in table.rows.iter().zip(&table.labels) {
            let c = label.index();
            for f in 0..N_FEATURES {
                lo[c][f] = lo[c][f].min(row[f]);
                hi[c][f] = hi[c][f].max(row[f]);
            }
        }
        for (i, p) in bal.provenance.iter().enumerate() {
            if *p != balance::Provenance::Synthetic {
                prop_assert_eq!(&bal.table.rows[i], &table.rows[i]);
                continue;
            }
            let c = bal.table.labels[i].index();
            let row = &bal.table.rows[i];
            for f in 0..N_FEATURES {
                prop_assert!(row[f] >= lo[c][f] && row[f] <= hi[c][f]);
            }
            let steel = row[STEEL_FEATURE];
            prop_assert!(steel == 0.0 || steel == 1.0);
        }
    }

    #[test]
    fn undersample_keeps_original_rows_only(sizes in class_sizes(), seed in any::<u64>()) {
        let table = build_table(&sizes, seed, 4.0);
        let bal = balance(&table, &BalanceConfig::new(Balancing::Undersample, seed)).unwrap();
        for (row, &label) in bal.table.rows.iter().zip(&bal.table.labels) {
            prop_assert!(table
                .rows
                .iter()
                .zip(&table.labels)
                .any(|(r, &l)| r == row && l == label));
        }
    }

    #[test]
    fn gini_never_increases_under_merge(
        a in prop::collection::vec(0u32..40, N_CLASSES),
        b in prop::collection::vec(0u32..40, N_CLASSES),
    ) {
        let to_counts = |v: &[u32]| {
            let mut c = [0u32; N_CLASSES];
            c.copy_from_slice(v);
            c
        };
        let (a, b) = (to_counts(&a), to_counts(&b));
        let (na, nb) = (a.iter().sum::<u32>() as f64, b.iter().sum::<u32>() as f64);
        prop_assume!(na > 0.0 && nb > 0.0);
        let mut merged = a;
        for (m, x) in merged.iter_mut().zip(&b) {
            *m += x;
        }
        let pooled = gini(&merged).unwrap();
        let split = (na * gini(&a).unwrap() + nb * gini(&b).unwrap()) / (na + nb);
        prop_assert!(pooled >= split - 1e-12);
    }

    #[test]
    fn stratified_folds_partition_evenly(sizes in class_sizes(), seed in any::<u64>()) {
        let table = build_table(&sizes, seed, 4.0);
        let n_folds = 5;
        let plan = FoldPlan::stratified(&table.labels, n_folds, seed).unwrap();
        let mut seen = vec![0u32; table.len()];
        for fold in &plan.folds {
            for &i in fold {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for c in 0..GEN_CLASSES {
            let per_fold: Vec<usize> = plan
                .folds
                .iter()
                .map(|f| f.iter().filter(|&&i| table.labels[i].index() == c).count())
                .collect();
            let spread = per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap();
            prop_assert!(spread <= 1);
        }
        for fold in 0..n_folds {
            let train = plan.train_indices(fold);
            prop_assert_eq!(train.len() + plan.folds[fold].len(), table.len());
            prop_assert!(plan.folds[fold].iter().all(|i| !train.contains(i)));
        }
    }
}

fn arb_atom() -> impl Strategy<Value = Atom> {
    (0usize..N_FEATURES, 0u8..5, -2i32..6).prop_map(|(feature, rel, v)| {
        let value = v as f64 * 0.5;
        match rel {
            0 => Atom::le(feature, value),
            1 => Atom::lt(feature, value),
            2 => Atom::ge(feature, value),
            3 => Atom::gt(feature, value),
            _ => Atom::steel(if v % 2 == 0 { Steel::A300 } else { Steel::A400 }),
        }
    })
}

fn atom_matches(atom: &Atom, row: &Row) -> bool {
    let v = row[atom.feature];
    match atom.rel {
        Rel::Le(b) => v <= b,
        Rel::Lt(b) => v < b,
        Rel::Ge(b) => v >= b,
        Rel::Gt(b) => v > b,
        Rel::SteelIs(level) => Steel::from_encoded(v) == level,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn condition_equals_atom_conjunction(
        atoms in prop::collection::vec(arb_atom(), 1..6),
        rows_seed in any::<u64>(),
    ) {
        let mut rng = stage_rng(rows_seed, "prop-rows");
        let rows: Vec<Row> = (0..40)
            .map(|_| {
                let mut r = [0.0; N_FEATURES];
                for v in r.iter_mut() {
                    *v = rng.random_range(-3i32..7) as f64 * 0.5;
                }
                r[STEEL_FEATURE] = f64::from(rng.random::<bool>());
                r
            })
            .collect();
        match Condition::from_atoms(&atoms) {
            Ok(cond) => {
                for row in &rows {
                    let conj = atoms.iter().all(|a| atom_matches(a, row));
                    prop_assert_eq!(cond.matches(row), conj);
                }
            }
            Err(Error::UnsatisfiableCondition(_)) => {
                for row in &rows {
                    prop_assert!(!atoms.iter().all(|a| atom_matches(a, row)));
                }
            }
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
        }
    }

    #[test]
    fn condition_normalization_ignores_atom_order(
        atoms in prop::collection::vec(arb_atom(), 1..6),
        rot in 0usize..6,
    ) {
        let mut rotated = atoms.clone();
        rotated.rotate_left(rot % atoms.len());
        let a = Condition::from_atoms(&atoms);
        let b = Condition::from_atoms(&rotated);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.key(), b.key());
                prop_assert_eq!(a.to_string(), b.to_string());
            }
            (Err(Error::UnsatisfiableCondition(_)), Err(Error::UnsatisfiableCondition(_))) => {}
            (a, b) => {
                return Err(TestCaseError::fail(format!("order-dependent outcome: {a:?} vs {b:?}")))
            }
        }
    }

    #[test]
    fn rule_scores_rescale_to_unit_top(
        stats in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0usize..N_CLASSES), 1..24),
        k in 1usize..30,
    ) {
        let rules: Vec<ForestRule> = stats
            .iter()
            .map(|&(freq, err, class)| ForestRule {
                condition: Condition::from_atoms(&[Atom::le(0, freq)]).unwrap(),
                prediction: FaultLabel::ALL[class],
                freq,
                err,
                imp: 0.0,
                n_covered: (freq * 100.0) as usize + 1,
            })
            .collect();
        let scored = score_and_select(&rules, k);
        prop_assert!(!scored.is_empty());
        prop_assert!(scored.len() <= k);
        let cap = k.div_ceil(N_CLASSES);
        for c in 0..N_CLASSES {
            let per_class = scored.iter().filter(|r| r.prediction.index() == c).count();
            prop_assert!(per_class <= cap);
        }
        for w in scored.windows(2) {
            prop_assert!(w[0].imp >= w[1].imp);
        }
        let top = scored[0].imp;
        prop_assert!(top == 1.0 || scored.iter().all(|r| r.imp == 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn apriori_equals_reference_miner(sizes in class_sizes(), seed in any::<u64>()) {
        let mut table = build_table(&sizes, seed, 4.0);
        let mut rng = stage_rng(seed, "prop-coarse");
        for row in &mut table.rows {
            for f in 0..N_FEATURES {
                if f != STEEL_FEATURE {
                    row[f] = if f < 3 { row[f].round() } else { rng.random_range(0..2) as f64 };
                }
            }
        }
        let cfg = rules::AssocConfig {
            bins: 3,
            min_support: 0.1,
            min_confidence: 0.6,
            max_len: 4,
        };
        let (_, tt) = discretize(&table, cfg.bins).unwrap();
        let fast = apriori_mine(&tt, &cfg).unwrap();
        let slow = reference_mine(&tt, &cfg).unwrap();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn breakdown_telescopes_under_random_orderings(
        sizes in class_sizes(),
        seed in any::<u64>(),
        shuffle_seed in any::<u64>(),
    ) {
        let table = build_table(&sizes, seed, 6.0);
        let params = ForestParams { n_trees: 8, mtry: 6, min_node_size: 1, seed };
        let forest = train_forest(&table, &params).unwrap();
        let medoid = Medoid { fault: FaultLabel::ALL[0], values: table.rows[0], class_size: sizes[0] };
        let mut ordering: Vec<usize> = (0..N_FEATURES).collect();
        use rand::seq::SliceRandom;
        ordering.shuffle(&mut stage_rng(shuffle_seed, "prop-order"));
        let bd = breakdown(&forest, &medoid, FaultLabel::ALL[1], &ordering, &table).unwrap();
        prop_assert!(bd.completeness_error() < 1e-9);
        prop_assert_eq!(bd.contributions.len(), N_FEATURES);
    }
}
