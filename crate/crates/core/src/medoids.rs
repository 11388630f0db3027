//! Prototypical rows per fault class: numeric medians plus the modal
//! steel type, computed on the original data.

use crate::data::FaultTable;
use crate::error::{Error, Result};
use crate::schema::{FaultLabel, Row, Steel, FEATURE_NAMES, N_FEATURES, STEEL_FEATURE};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// One representative row for a class. `values` follows the schema order
/// with the steel type in its encoded slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Medoid {
    pub fault: FaultLabel,
    pub values: Row,
    pub class_size: usize,
}

impl Medoid {
    pub fn steel(&self) -> Steel {
        Steel::from_encoded(self.values[STEEL_FEATURE])
    }

    pub fn value(&self, feature: usize) -> f64 {
        self.values[feature]
    }

    /// Feature-name keyed map with the steel type as its level name.
    pub fn named_map(&self) -> Map<String, Value> {
        let mut map = Map::new();
        for (f, name) in FEATURE_NAMES.iter().enumerate() {
            if f == STEEL_FEATURE {
                map.insert(name.to_string(), json!(self.steel().name()));
            } else {
                map.insert(name.to_string(), json!(self.values[f]));
            }
        }
        map
    }
}

fn median_sorted(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Medians per numeric feature, modal steel type (ties keep A300), one
/// medoid per class in report order.
pub fn compute_medoids(table: &FaultTable) -> Result<Vec<Medoid>> {
    let mut out = Vec::with_capacity(FaultLabel::ALL.len());
    for &fault in &FaultLabel::ALL {
        let idx = table.class_rows(fault);
        if idx.is_empty() {
            return Err(Error::ClassTooSmall {
                label: fault.name().into(),
                n: 0,
                needed: 1,
            });
        }
        let mut values = [0.0; N_FEATURES];
        for f in 0..N_FEATURES {
            if f == STEEL_FEATURE {
                let a400 = idx.iter().filter(|r| r[STEEL_FEATURE] >= 0.5).count();
                let a300 = idx.len() - a400;
                let steel = if a300 >= a400 { Steel::A300 } else { Steel::A400 };
                values[f] = steel.encoded();
            } else {
                let mut col: Vec<f64> = idx.iter().map(|r| r[f]).collect();
                values[f] = median_sorted(&mut col);
            }
        }
        out.push(Medoid { fault, values, class_size: idx.len() });
    }
    Ok(out)
}

/// Min-max scales each medoid value with full-table feature ranges;
/// features constant over the table map to 0.
pub fn scale_for_radar(medoids: &[Medoid], table: &FaultTable) -> Result<Vec<(FaultLabel, Row)>> {
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut lo = [f64::INFINITY; N_FEATURES];
    let mut hi = [f64::NEG_INFINITY; N_FEATURES];
    for row in &table.rows {
        for f in 0..N_FEATURES {
            lo[f] = lo[f].min(row[f]);
            hi[f] = hi[f].max(row[f]);
        }
    }
    Ok(medoids
        .iter()
        .map(|m| {
            let mut scaled = [0.0; N_FEATURES];
            for f in 0..N_FEATURES {
                let span = hi[f] - lo[f];
                if span > 0.0 {
                    scaled[f] = (m.values[f] - lo[f]) / span;
                }
            }
            (m.fault, scaled)
        })
        .collect())
}

/// The medoid artifact: {fault → {feature → value}}.
pub fn medoids_json(medoids: &[Medoid]) -> Value {
    let mut map = Map::new();
    for m in medoids {
        map.insert(m.fault.name().to_string(), Value::Object(m.named_map()));
    }
    Value::Object(map)
}
