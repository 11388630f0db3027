//! Feature schema and class vocabulary for the steel-plates fault table.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of predictor features (25 numeric measurements plus TypeOfSteel).
pub const N_FEATURES: usize = 26;
/// Number of fault classes.
pub const N_CLASSES: usize = 7;
/// Schema index of the single categorical feature, TypeOfSteel.
pub const STEEL_FEATURE: usize = 11;

/// One observation: 26 feature values in schema order. The TypeOfSteel slot
/// holds 0.0 for A300 and 1.0 for A400.
pub type Row = [f64; N_FEATURES];

/// Predictor names in schema order (raw-file column order with the two
/// steel indicator columns collapsed into TypeOfSteel).
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "X_Minimum",
    "X_Maximum",
    "Y_Minimum",
    "Y_Maximum",
    "Pixels_Areas",
    "X_Perimeter",
    "Y_Perimeter",
    "Sum_of_Luminosity",
    "Minimum_of_Luminosity",
    "Maximum_of_Luminosity",
    "Length_of_Conveyer",
    "TypeOfSteel",
    "Steel_Plate_Thickness",
    "Edges_Index",
    "Empty_Index",
    "Square_Index",
    "Outside_X_Index",
    "Edges_X_Index",
    "Edges_Y_Index",
    "Outside_Global_Index",
    "LogOfAreas",
    "Log_X_Index",
    "Log_Y_Index",
    "Orientation_Index",
    "Luminosity_Index",
    "SigmoidOfAreas",
];

/// Looks up a feature's schema index by name.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

/// The two steel grades of the TypeOfSteel feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Steel {
    A300,
    A400,
}

impl Steel {
    /// Encoded feature value (A300 = 0.0, A400 = 1.0).
    pub fn encoded(self) -> f64 {
        match self {
            Steel::A300 => 0.0,
            Steel::A400 => 1.0,
        }
    }

    /// Decodes a feature value; anything below 0.5 reads as A300.
    pub fn from_encoded(v: f64) -> Self {
        if v < 0.5 {
            Steel::A300
        } else {
            Steel::A400
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Steel::A300 => "A300",
            Steel::A400 => "A400",
        }
    }
}

impl fmt::Display for Steel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fault class of a plate. Variant order is the fixed alphabetical report
/// order used by confusion matrices and per-class tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaultLabel {
    #[serde(rename = "Bumps")]
    Bumps,
    #[serde(rename = "Common_Other")]
    CommonOther,
    #[serde(rename = "Dirtiness")]
    Dirtiness,
    #[serde(rename = "K_Scratch")]
    KScratch,
    #[serde(rename = "Pastry")]
    Pastry,
    #[serde(rename = "Stains")]
    Stains,
    #[serde(rename = "Z_Scratch")]
    ZScratch,
}

impl FaultLabel {
    /// All classes in report order.
    pub const ALL: [FaultLabel; N_CLASSES] = [
        FaultLabel::Bumps,
        FaultLabel::CommonOther,
        FaultLabel::Dirtiness,
        FaultLabel::KScratch,
        FaultLabel::Pastry,
        FaultLabel::Stains,
        FaultLabel::ZScratch,
    ];

    /// Index into class-ordered vectors (confusion matrices, count arrays).
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&l| l == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultLabel::Bumps => "Bumps",
            FaultLabel::CommonOther => "Common_Other",
            FaultLabel::Dirtiness => "Dirtiness",
            FaultLabel::KScratch => "K_Scratch",
            FaultLabel::Pastry => "Pastry",
            FaultLabel::Stains => "Stains",
            FaultLabel::ZScratch => "Z_Scratch",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|l| l.name() == name)
    }
}

impl fmt::Display for FaultLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-class counts addressed by `FaultLabel::index`.
pub type ClassCounts = [u32; N_CLASSES];

/// Argmax over a class-ordered vector; ties resolve to the earlier class.
pub fn argmax_class(values: &[f64; N_CLASSES]) -> FaultLabel {
    let mut best = 0;
    for i in 1..N_CLASSES {
        if values[i] > values[best] {
            best = i;
        }
    }
    FaultLabel::ALL[best]
}

/// `argmax_class` over integer counts.
pub fn argmax_counts(counts: &ClassCounts) -> FaultLabel {
    let mut best = 0;
    for i in 1..N_CLASSES {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    FaultLabel::ALL[best]
}
