//! IF-THEN rule extraction: shared condition algebra, forest path
//! harvesting, and class association rule mining.

pub mod assoc;
pub mod condition;
pub mod forest;

pub use assoc::{
    apriori_mine, discretize, filter_rules, reference_mine, AssocConfig, AssocRule,
    Discretization, ItemCatalog, TransactionTable,
};
pub use condition::{Atom, Condition, Endpoint, Rel, Slot};
pub use forest::{
    harvest_paths, mine_forest_rules, prune_rule, score_and_select, ForestRule, ForestRuleConfig,
    RawRule,
};
