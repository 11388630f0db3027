//! Frozen facts about the bundled reference dataset. These values were
//! established independently of the code under test and must reproduce
//! exactly on every run.

use std::collections::BTreeMap;
use std::path::PathBuf;

use steelfault::*;

fn data_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/steel_plates_faults.tsv")
}

fn reference_table() -> FaultTable {
    data::ingest(data_path(), Format::Raw).expect("reference data ingests")
}

#[test]
fn reference_table_shape_and_class_counts() {
    let table = reference_table();
    assert_eq!(table.len(), 1941);
    let counts = table.class_counts().unwrap();
    let expected: [(FaultLabel, u32); 7] = [
        (FaultLabel::Bumps, 402),
        (FaultLabel::CommonOther, 673),
        (FaultLabel::Dirtiness, 55),
        (FaultLabel::KScratch, 391),
        (FaultLabel::Pastry, 158),
        (FaultLabel::Stains, 72),
        (FaultLabel::ZScratch, 190),
    ];
    for (label, n) in expected {
        assert_eq!(counts[label as usize], n, "count for {}", label.name());
    }
    assert_eq!(counts.iter().sum::<u32>(), 1941);
}

#[test]
fn steel_fault_crosstab_is_frozen() {
    let table = reference_table();
    let crosstab = table.crosstab_steel_fault().unwrap();
    let expected = [
        [279, 123],
        [266, 407],
        [9, 46],
        [1, 390],
        [49, 109],
        [1, 71],
        [172, 18],
    ];
    assert_eq!(crosstab, expected);
    let a300: u32 = crosstab.iter().map(|r| r[0]).sum();
    let a400: u32 = crosstab.iter().map(|r| r[1]).sum();
    assert_eq!((a300, a400), (777, 1164));
}

#[test]
fn medoid_cells_are_frozen() {
    let table = reference_table();
    let medoids = compute_medoids(&table).unwrap();
    let by_label: BTreeMap<FaultLabel, &Medoid> =
        medoids.iter().map(|m| (m.fault, m)).collect();
    let cell = |label: FaultLabel, feature: &str| -> f64 {
        by_label[&label].value(feature_index(feature).unwrap())
    };

    assert_eq!(cell(FaultLabel::Bumps, "X_Minimum"), 856.5);
    assert_eq!(cell(FaultLabel::Bumps, "Pixels_Areas"), 120.5);
    assert_eq!(cell(FaultLabel::Bumps, "Length_of_Conveyer"), 1624.0);
    assert_eq!(cell(FaultLabel::Bumps, "Steel_Plate_Thickness"), 70.0);
    assert_eq!(by_label[&FaultLabel::Bumps].steel(), Steel::A300);

    assert_eq!(cell(FaultLabel::CommonOther, "Length_of_Conveyer"), 1372.0);
    assert_eq!(by_label[&FaultLabel::CommonOther].steel(), Steel::A400);

    assert_eq!(cell(FaultLabel::Dirtiness, "Steel_Plate_Thickness"), 100.0);
    assert_eq!(cell(FaultLabel::Dirtiness, "Y_Perimeter"), 35.0);
    assert_eq!(by_label[&FaultLabel::Dirtiness].steel(), Steel::A400);

    assert_eq!(cell(FaultLabel::KScratch, "Pixels_Areas"), 6281.0);
    assert_eq!(cell(FaultLabel::KScratch, "Steel_Plate_Thickness"), 40.0);
    assert_eq!(cell(FaultLabel::KScratch, "Sum_of_Luminosity"), 654358.0);
    assert_eq!(by_label[&FaultLabel::KScratch].steel(), Steel::A400);

    assert_eq!(cell(FaultLabel::Pastry, "X_Minimum"), 823.0);
    assert_eq!(cell(FaultLabel::Pastry, "Length_of_Conveyer"), 1648.0);
    assert_eq!(cell(FaultLabel::Pastry, "Steel_Plate_Thickness"), 85.0);
    assert_eq!(by_label[&FaultLabel::Pastry].steel(), Steel::A400);

    assert_eq!(cell(FaultLabel::Stains, "Pixels_Areas"), 16.5);
    assert_eq!(cell(FaultLabel::Stains, "X_Perimeter"), 7.0);
    assert_eq!(by_label[&FaultLabel::Stains].steel(), Steel::A400);

    assert_eq!(cell(FaultLabel::ZScratch, "Steel_Plate_Thickness"), 70.0);
    assert_eq!(cell(FaultLabel::ZScratch, "Maximum_of_Luminosity"), 124.0);
    assert_eq!(by_label[&FaultLabel::ZScratch].steel(), Steel::A300);

    for m in &medoids {
        assert_eq!(m.class_size, table.class_rows(m.fault).len());
    }
}

#[test]
fn correlation_filter_flags_the_frozen_five() {
    let table = reference_table();
    let report = explain::correlation_filter(&table, 0.90).unwrap();
    let mut flagged = report.flagged_names();
    flagged.sort_unstable();
    assert_eq!(
        flagged,
        vec![
            "Pixels_Areas",
            "Sum_of_Luminosity",
            "X_Minimum",
            "X_Perimeter",
            "Y_Minimum",
        ]
    );
    assert!(report.zero_variance.is_empty());
}

#[test]
fn balancing_counts_on_reference_data() {
    let table = reference_table();
    for (strategy, per_class) in [
        (Strategy::Undersample, 55u32),
        (Strategy::Oversample, 673),
        (Strategy::Smote, 673),
    ] {
        let cfg = BalanceConfig { strategy, k_neighbors: 5, seed: 42 };
        let balanced = balance(&table, &cfg).unwrap();
        let counts = balanced.table.class_counts().unwrap();
        assert_eq!(counts, [per_class; N_CLASSES], "{strategy:?}");
        assert_eq!(balanced.table.len(), per_class as usize * N_CLASSES);
    }
}

#[test]
fn cleaned_round_trip_preserves_every_row() {
    let table = reference_table();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cleaned.csv");
    data::export_cleaned(&table, &path, b',', None).unwrap();
    let reread = data::ingest(&path, Format::Cleaned).unwrap();
    assert_eq!(reread.labels, table.labels);
    assert_eq!(reread.rows.len(), table.rows.len());
    for (a, b) in reread.rows.iter().zip(&table.rows) {
        assert_eq!(a, b);
    }
}
