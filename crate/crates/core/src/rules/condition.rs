//! Conjunctions of per-feature constraints, normalized to at most one
//! slot per feature.

use crate::error::{Error, Result};
use crate::schema::{Row, Steel, FEATURE_NAMES, N_FEATURES, STEEL_FEATURE};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// One end of a numeric interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Endpoint {
    Unbounded,
    Inclusive(f64),
    Exclusive(f64),
}

impl Endpoint {
    fn allows_from_below(&self, v: f64) -> bool {
        match *self {
            Endpoint::Unbounded => true,
            Endpoint::Inclusive(a) => v >= a,
            Endpoint::Exclusive(a) => v > a,
        }
    }

    fn allows_from_above(&self, v: f64) -> bool {
        match *self {
            Endpoint::Unbounded => true,
            Endpoint::Inclusive(b) => v <= b,
            Endpoint::Exclusive(b) => v < b,
        }
    }

    /// The stricter lower bound: larger value wins, exclusive beats
    /// inclusive at equal values.
    fn tighter_lower(self, other: Endpoint) -> Endpoint {
        match (self, other) {
            (Endpoint::Unbounded, e) | (e, Endpoint::Unbounded) => e,
            (a, b) => {
                let (va, vb) = (a.value(), b.value());
                if va > vb {
                    a
                } else if vb > va {
                    b
                } else if matches!(a, Endpoint::Exclusive(_)) {
                    a
                } else {
                    b
                }
            }
        }
    }

    /// The stricter upper bound: smaller value wins, exclusive beats
    /// inclusive at equal values.
    fn tighter_upper(self, other: Endpoint) -> Endpoint {
        match (self, other) {
            (Endpoint::Unbounded, e) | (e, Endpoint::Unbounded) => e,
            (a, b) => {
                let (va, vb) = (a.value(), b.value());
                if va < vb {
                    a
                } else if vb < va {
                    b
                } else if matches!(a, Endpoint::Exclusive(_)) {
                    a
                } else {
                    b
                }
            }
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Endpoint::Unbounded => f64::NAN,
            Endpoint::Inclusive(v) | Endpoint::Exclusive(v) => v,
        }
    }

    fn key_bytes(&self, out: &mut Vec<u8>) {
        match *self {
            Endpoint::Unbounded => out.push(0),
            Endpoint::Inclusive(v) => {
                out.push(1);
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            Endpoint::Exclusive(v) => {
                out.push(2);
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
    }
}

/// Normalized per-feature constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    Interval { lo: Endpoint, hi: Endpoint },
    Steel(Steel),
}

impl Slot {
    pub fn matches(&self, v: f64) -> bool {
        match self {
            Slot::Interval { lo, hi } => lo.allows_from_below(v) && hi.allows_from_above(v),
            Slot::Steel(s) => Steel::from_encoded(v) == *s,
        }
    }
}

/// Atomic constraint as produced by rule sources, before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub feature: usize,
    pub rel: Rel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rel {
    Le(f64),
    Lt(f64),
    Ge(f64),
    Gt(f64),
    SteelIs(Steel),
}

impl Atom {
    pub fn le(feature: usize, bound: f64) -> Atom {
        Atom { feature, rel: Rel::Le(bound) }
    }

    pub fn gt(feature: usize, bound: f64) -> Atom {
        Atom { feature, rel: Rel::Gt(bound) }
    }

    pub fn ge(feature: usize, bound: f64) -> Atom {
        Atom { feature, rel: Rel::Ge(bound) }
    }

    pub fn lt(feature: usize, bound: f64) -> Atom {
        Atom { feature, rel: Rel::Lt(bound) }
    }

    pub fn steel(level: Steel) -> Atom {
        Atom { feature: STEEL_FEATURE, rel: Rel::SteelIs(level) }
    }
}

/// Conjunction over features; absent features are wildcards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub slots: BTreeMap<usize, Slot>,
}

impl Condition {
    /// Normalizes a conjunction of atoms: per-feature bounds intersect
    /// into one interval, steel constraints into one level, and the
    /// result is checked for satisfiability.
    pub fn from_atoms(atoms: &[Atom]) -> Result<Condition> {
        let mut bounds: BTreeMap<usize, (Endpoint, Endpoint)> = BTreeMap::new();
        for atom in atoms {
            if atom.feature >= N_FEATURES {
                return Err(Error::UnknownFeature(atom.feature.to_string()));
            }
            if matches!(atom.rel, Rel::SteelIs(_)) && atom.feature != STEEL_FEATURE {
                return Err(Error::InvalidParam(
                    "steel level constraint on a numeric feature".into(),
                ));
            }
            let (lo, hi) = match atom.rel {
                Rel::Le(b) => (Endpoint::Unbounded, Endpoint::Inclusive(b)),
                Rel::Lt(b) => (Endpoint::Unbounded, Endpoint::Exclusive(b)),
                Rel::Ge(a) => (Endpoint::Inclusive(a), Endpoint::Unbounded),
                Rel::Gt(a) => (Endpoint::Exclusive(a), Endpoint::Unbounded),
                Rel::SteelIs(s) => {
                    let v = s.encoded();
                    (Endpoint::Inclusive(v), Endpoint::Inclusive(v))
                }
            };
            let entry = bounds
                .entry(atom.feature)
                .or_insert((Endpoint::Unbounded, Endpoint::Unbounded));
            entry.0 = entry.0.tighter_lower(lo);
            entry.1 = entry.1.tighter_upper(hi);
        }
        let mut slots = BTreeMap::new();
        for (feature, (lo, hi)) in bounds {
            if let (Endpoint::Unbounded, Endpoint::Unbounded) = (lo, hi) {
                continue;
            }
            if !satisfiable(lo, hi) {
                return Err(Error::UnsatisfiableCondition(FEATURE_NAMES[feature].into()));
            }
            if feature == STEEL_FEATURE {
                let slot = Slot::Interval { lo, hi };
                let a300 = slot.matches(Steel::A300.encoded());
                let a400 = slot.matches(Steel::A400.encoded());
                match (a300, a400) {
                    (true, true) => continue,
                    (true, false) => slots.insert(feature, Slot::Steel(Steel::A300)),
                    (false, true) => slots.insert(feature, Slot::Steel(Steel::A400)),
                    (false, false) => {
                        return Err(Error::UnsatisfiableCondition(
                            FEATURE_NAMES[feature].into(),
                        ))
                    }
                };
            } else {
                slots.insert(feature, Slot::Interval { lo, hi });
            }
        }
        Ok(Condition { slots })
    }

    pub fn matches(&self, row: &Row) -> bool {
        self.slots.iter().all(|(&f, slot)| slot.matches(row[f]))
    }

    /// Number of constrained features.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Canonical bytes for deduplication; equal conditions produce equal
    /// keys regardless of the atom order they were built from.
    pub fn key(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.slots.len() * 20);
        for (&f, slot) in &self.slots {
            out.extend_from_slice(&(f as u32).to_le_bytes());
            match slot {
                Slot::Interval { lo, hi } => {
                    out.push(0);
                    lo.key_bytes(&mut out);
                    hi.key_bytes(&mut out);
                }
                Slot::Steel(s) => {
                    out.push(1);
                    out.push(s.encoded() as u8);
                }
            }
        }
        out
    }
}

fn satisfiable(lo: Endpoint, hi: Endpoint) -> bool {
    match (lo, hi) {
        (Endpoint::Unbounded, _) | (_, Endpoint::Unbounded) => true,
        (a, b) => {
            let (va, vb) = (a.value(), b.value());
            va < vb
                || (va == vb
                    && matches!(a, Endpoint::Inclusive(_))
                    && matches!(b, Endpoint::Inclusive(_)))
        }
    }
}

fn fmt_bound(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.slots.is_empty() {
            return write!(f, "TRUE");
        }
        let mut parts = Vec::with_capacity(self.slots.len());
        for (&feature, slot) in &self.slots {
            let name = FEATURE_NAMES[feature];
            let part = match slot {
                Slot::Steel(s) => format!("{name}={}", s.name()),
                Slot::Interval { lo, hi } => match (lo, hi) {
                    (Endpoint::Unbounded, Endpoint::Inclusive(b)) => {
                        format!("{name}<={}", fmt_bound(*b))
                    }
                    (Endpoint::Unbounded, Endpoint::Exclusive(b)) => {
                        format!("{name}<{}", fmt_bound(*b))
                    }
                    (Endpoint::Exclusive(a), Endpoint::Unbounded) => {
                        format!("{name}>{}", fmt_bound(*a))
                    }
                    (Endpoint::Inclusive(a), Endpoint::Unbounded) => {
                        format!("{name}>={}", fmt_bound(*a))
                    }
                    (Endpoint::Inclusive(a), Endpoint::Exclusive(b)) => {
                        format!("{name}=[{},{})", fmt_bound(*a), fmt_bound(*b))
                    }
                    (Endpoint::Exclusive(a), Endpoint::Inclusive(b)) => {
                        format!("{name}=({},{}]", fmt_bound(*a), fmt_bound(*b))
                    }
                    (Endpoint::Inclusive(a), Endpoint::Inclusive(b)) => {
                        format!("{name}=[{},{}]", fmt_bound(*a), fmt_bound(*b))
                    }
                    (Endpoint::Exclusive(a), Endpoint::Exclusive(b)) => {
                        format!("{name}=({},{})", fmt_bound(*a), fmt_bound(*b))
                    }
                    (Endpoint::Unbounded, Endpoint::Unbounded) => unreachable!(),
                },
            };
            parts.push(part);
        }
        write!(f, "{}", parts.join(" & "))
    }
}
