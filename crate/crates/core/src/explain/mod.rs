//! Model-agnostic explanation engine: permutation importance, the
//! correlation filter, Ceteris Paribus and Partial Dependence profiles,
//! and Breakdown attributions.

pub mod breakdown;
pub mod correlation;
pub mod importance;
pub mod profile;

pub use breakdown::{breakdown, default_ordering, Breakdown};
pub use correlation::{correlation_filter, CorrelationGroup, CorrelationReport};
pub use importance::{permutation_importance, ImportanceReport};
pub use profile::{ceteris_paribus, partial_dependence, Profile, ProfileKind};
