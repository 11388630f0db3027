//! Ceteris Paribus and Partial Dependence profiles.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::medoids::Medoid;
use crate::model::Model;
use crate::rng::stage_rng;
use crate::schema::{Row, Steel, N_CLASSES, N_FEATURES, STEEL_FEATURE};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProfileKind {
    Cp,
    Pd,
}

/// Per-class probabilities along a feature grid. For the steel indicator
/// the grid is its two encoded levels; numeric grids are strictly
/// increasing. `rug` holds the observed feature values in row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub kind: ProfileKind,
    pub feature: usize,
    pub grid: Vec<f64>,
    pub values: Vec<[f64; N_CLASSES]>,
    pub rug: Vec<f64>,
    pub anchor: Option<Medoid>,
}

impl Profile {
    pub fn level_names(&self) -> Option<Vec<&'static str>> {
        (self.feature == STEEL_FEATURE)
            .then(|| self.grid.iter().map(|&v| Steel::from_encoded(v).name()).collect())
    }
}

fn observed_range(table: &FaultTable, feature: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in &table.rows {
        lo = lo.min(row[feature]);
        hi = hi.max(row[feature]);
    }
    (lo, hi)
}

fn numeric_grid(lo: f64, hi: f64, g: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let mut grid: Vec<f64> = (0..g)
        .map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64)
        .collect();
    grid[g - 1] = hi;
    grid.dedup_by(|a, b| a == b);
    grid
}

fn base_grid(table: &FaultTable, feature: usize, g: usize) -> Result<Vec<f64>> {
    if feature >= N_FEATURES {
        return Err(Error::UnknownFeature(feature.to_string()));
    }
    if feature == STEEL_FEATURE {
        return Ok(vec![Steel::A300.encoded(), Steel::A400.encoded()]);
    }
    if g < 2 {
        return Err(Error::InvalidParam("grid size must be >= 2".into()));
    }
    let (lo, hi) = observed_range(table, feature);
    Ok(numeric_grid(lo, hi, g))
}

fn evaluate_grid<M: Model + ?Sized>(
    model: &M,
    template: &Row,
    feature: usize,
    grid: &[f64],
) -> Vec<[f64; N_CLASSES]> {
    grid.par_iter()
        .map(|&z| {
            let mut row = *template;
            row[feature] = z;
            model.predict_proba(&row)
        })
        .collect()
}

/// Probability of each class as the anchor's `feature` sweeps a grid of
/// `g` equidistant points over the observed range, with the anchor's own
/// value inserted so the identity point is evaluated exactly.
pub fn ceteris_paribus<M: Model + ?Sized>(
    model: &M,
    anchor: &Medoid,
    feature: usize,
    g: usize,
    table: &FaultTable,
) -> Result<Profile> {
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut grid = base_grid(table, feature, g)?;
    let own = anchor.values[feature];
    if let Err(pos) = grid.binary_search_by(|v| v.total_cmp(&own)) {
        grid.insert(pos, own);
    }
    let values = evaluate_grid(model, &anchor.values, feature, &grid);
    Ok(Profile {
        kind: ProfileKind::Cp,
        feature,
        grid,
        values,
        rug: table.rows.iter().map(|r| r[feature]).collect(),
        anchor: Some(anchor.clone()),
    })
}

/// Mean model response over `m` background rows as `feature` sweeps the
/// grid. With `m` equal to the table size every row is used and the
/// result is sampling-free; smaller `m` draws a seeded subsample.
pub fn partial_dependence<M: Model + ?Sized>(
    model: &M,
    table: &FaultTable,
    feature: usize,
    g: usize,
    m: usize,
    seed: u64,
) -> Result<Profile> {
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    if m < 1 || m > table.len() {
        return Err(Error::InvalidParam(format!(
            "background sample {m} not in 1..={}",
            table.len()
        )));
    }
    let grid = base_grid(table, feature, g)?;
    let background: Vec<usize> = if m == table.len() {
        (0..m).collect()
    } else {
        let mut idx: Vec<usize> = (0..table.len()).collect();
        idx.shuffle(&mut stage_rng(seed, "pd-background"));
        idx.truncate(m);
        idx.sort_unstable();
        idx
    };
    let values: Vec<[f64; N_CLASSES]> = grid
        .par_iter()
        .map(|&z| {
            let mut acc = [0.0; N_CLASSES];
            for &i in &background {
                let mut row = table.rows[i];
                row[feature] = z;
                let p = model.predict_proba(&row);
                for c in 0..N_CLASSES {
                    acc[c] += p[c];
                }
            }
            for v in &mut acc {
                *v /= m as f64;
            }
            acc
        })
        .collect();
    Ok(Profile {
        kind: ProfileKind::Pd,
        feature,
        grid,
        values,
        rug: table.rows.iter().map(|r| r[feature]).collect(),
        anchor: None,
    })
}
