//! Breakdown attributions: sequential replacement of background features
//! by anchor values, one contribution per feature.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::explain::importance::ImportanceReport;
use crate::medoids::Medoid;
use crate::model::Model;
use crate::schema::{FaultLabel, FEATURE_NAMES, N_FEATURES};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: usize,
    pub value: f64,
    pub contribution: f64,
}

impl Contribution {
    pub fn feature_name(&self) -> &'static str {
        FEATURE_NAMES[self.feature]
    }
}

/// Attribution of `final_prediction - intercept` to features, in the
/// order they were fixed to the anchor's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub anchor: Medoid,
    pub target: FaultLabel,
    pub intercept: f64,
    pub contributions: Vec<Contribution>,
    pub final_prediction: f64,
}

impl Breakdown {
    /// |intercept + sum of contributions - final prediction|.
    pub fn completeness_error(&self) -> f64 {
        let total: f64 = self.contributions.iter().map(|c| c.contribution).sum();
        (self.intercept + total - self.final_prediction).abs()
    }

    /// Contributions sorted by descending signed value.
    pub fn ranked(&self) -> Vec<&Contribution> {
        let mut out: Vec<&Contribution> = self.contributions.iter().collect();
        out.sort_by(|a, b| {
            b.contribution
                .total_cmp(&a.contribution)
                .then(a.feature.cmp(&b.feature))
        });
        out
    }
}

fn mean_target<M: Model + ?Sized>(model: &M, rows: &[crate::schema::Row], target: usize) -> f64 {
    let vals: Vec<f64> = rows
        .par_iter()
        .map(|r| model.predict_proba(r)[target])
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Default replacement order: descending permutation importance.
pub fn default_ordering(report: &ImportanceReport) -> Vec<usize> {
    report.ordered_by_rank()
}

/// E_0 is the mean predicted target probability over the table; each step
/// fixes one more feature to the anchor's value and the contribution is
/// the resulting change in that mean. The final prediction is evaluated
/// on the anchor directly.
pub fn breakdown<M: Model + ?Sized>(
    model: &M,
    anchor: &Medoid,
    target: FaultLabel,
    ordering: &[usize],
    table: &FaultTable,
) -> Result<Breakdown> {
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut seen = [false; N_FEATURES];
    for &f in ordering {
        if f >= N_FEATURES || seen[f] {
            return Err(Error::InvalidParam(
                "breakdown ordering must be a permutation of the schema".into(),
            ));
        }
        seen[f] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::InvalidParam(
            "breakdown ordering must be a permutation of the schema".into(),
        ));
    }
    let t = target.index();
    let intercept = mean_target(model, &table.rows, t);
    let mut working = table.rows.clone();
    let mut previous = intercept;
    let mut contributions = Vec::with_capacity(N_FEATURES);
    for &f in ordering {
        for row in &mut working {
            row[f] = anchor.values[f];
        }
        let expected = mean_target(model, &working, t);
        contributions.push(Contribution {
            feature: f,
            value: anchor.values[f],
            contribution: expected - previous,
        });
        previous = expected;
    }
    Ok(Breakdown {
        anchor: anchor.clone(),
        target,
        intercept,
        contributions,
        final_prediction: model.predict_proba(&anchor.values)[t],
    })
}
