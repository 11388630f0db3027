//! Pearson correlation filter over the numeric features.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::schema::{FEATURE_NAMES, N_FEATURES, STEEL_FEATURE};
use serde::{Deserialize, Serialize};

/// One connected component of the |r| > threshold graph. `kept` is the
/// member with the smallest mean |r| to the rest of the component; the
/// others are `flagged` for removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGroup {
    pub members: Vec<usize>,
    pub mean_abs_r: Vec<f64>,
    pub kept: usize,
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub threshold: f64,
    pub groups: Vec<CorrelationGroup>,
    pub zero_variance: Vec<usize>,
}

impl CorrelationReport {
    /// Union of flagged features, ascending.
    pub fn flagged_features(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.groups.iter().flat_map(|g| g.flagged.clone()).collect();
        out.sort_unstable();
        out
    }

    pub fn flagged_names(&self) -> Vec<&'static str> {
        self.flagged_features()
            .into_iter()
            .map(|f| FEATURE_NAMES[f])
            .collect()
    }
}

fn pearson(table: &FaultTable, a: usize, b: usize) -> f64 {
    let n = table.len() as f64;
    let mut ma = 0.0;
    let mut mb = 0.0;
    for row in &table.rows {
        ma += row[a];
        mb += row[b];
    }
    ma /= n;
    mb /= n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for row in &table.rows {
        let da = row[a] - ma;
        let db = row[b] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Groups numeric features whose pairwise |Pearson r| exceeds the
/// threshold and, per group, keeps the member least correlated with the
/// rest (ties keep the later schema column). Each pair's r is computed
/// once, so the matrix is symmetric by construction and within-group
/// means of mirrored pairs compare bit-for-bit.
pub fn correlation_filter(table: &FaultTable, threshold: f64) -> Result<CorrelationReport> {
    if table.rows.len() < 2 {
        return Err(Error::EmptyTable);
    }
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidParam("correlation threshold must be in [0, 1)".into()));
    }
    let numeric: Vec<usize> = (0..N_FEATURES).filter(|&f| f != STEEL_FEATURE).collect();
    let mut zero_variance = Vec::new();
    let mut usable = Vec::new();
    for &f in &numeric {
        let first = table.rows[0][f];
        if table.rows.iter().all(|r| r[f] == first) {
            zero_variance.push(f);
        } else {
            usable.push(f);
        }
    }
    let mut r = [[0.0f64; N_FEATURES]; N_FEATURES];
    for (i, &a) in usable.iter().enumerate() {
        for &b in &usable[i + 1..] {
            let v = pearson(table, a, b);
            r[a][b] = v;
            r[b][a] = v;
        }
    }
    let mut component = vec![usize::MAX; N_FEATURES];
    let mut n_components = 0;
    for &start in &usable {
        if component[start] != usize::MAX {
            continue;
        }
        let id = n_components;
        n_components += 1;
        let mut stack = vec![start];
        component[start] = id;
        while let Some(f) = stack.pop() {
            for &g in &usable {
                if component[g] == usize::MAX && r[f][g].abs() > threshold {
                    component[g] = id;
                    stack.push(g);
                }
            }
        }
    }
    let mut groups = Vec::new();
    for id in 0..n_components {
        let members: Vec<usize> = usable.iter().copied().filter(|&f| component[f] == id).collect();
        if members.len() < 2 {
            continue;
        }
        let mean_abs_r: Vec<f64> = members
            .iter()
            .map(|&f| {
                let total: f64 = members
                    .iter()
                    .filter(|&&g| g != f)
                    .map(|&g| r[f][g].abs())
                    .sum();
                total / (members.len() - 1) as f64
            })
            .collect();
        let mut kept = members[0];
        let mut best = mean_abs_r[0];
        for (i, &f) in members.iter().enumerate() {
            if mean_abs_r[i] <= best {
                best = mean_abs_r[i];
                kept = f;
            }
        }
        let flagged = members.iter().copied().filter(|&f| f != kept).collect();
        groups.push(CorrelationGroup { members, mean_abs_r, kept, flagged });
    }
    Ok(CorrelationReport { threshold, groups, zero_variance })
}
