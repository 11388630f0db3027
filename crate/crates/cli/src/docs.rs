//! On-disk document formats shared by the subcommands. Every JSON
//! artifact carries a `schema` field so readers can reject layouts they
//! do not understand.

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;
use steelfault::ensemble::{EnsembleModel, ManualRule};
use steelfault::explain::{Breakdown, ImportanceReport, Profile};
use steelfault::rules::{
    AssocConfig, AssocRule, Discretization, Endpoint, ForestRule, ForestRuleConfig, ItemCatalog,
    Slot,
};
use steelfault::{ConfusionMatrix, FaultLabel, N_CLASSES, FEATURE_NAMES};

pub const DATASET_SCHEMA: u32 = 1;
pub const MODEL_SCHEMA: u32 = 1;
pub const MEDOIDS_SCHEMA: u32 = 1;
pub const RADAR_SCHEMA: u32 = 1;
pub const IMPORTANCE_SCHEMA: u32 = 1;
pub const PROFILE_SCHEMA: u32 = 1;
pub const BREAKDOWN_SCHEMA: u32 = 1;
pub const RULES_RF_SCHEMA: u32 = 1;
pub const RULES_ARM_SCHEMA: u32 = 1;
pub const MANUAL_RULES_SCHEMA: u32 = 1;
pub const ENSEMBLE_SCHEMA: u32 = 1;
pub const REPORT_SCHEMA: u32 = 1;
pub const MANIFEST_SCHEMA: u32 = 1;

/// Printed by `--version`; one line per serialized format.
pub const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nschema versions:",
    "\n  dataset 1  model 1  medoids 1  radar 1  importance 1",
    "\n  profile 1  breakdown 1  rules-rf 1  rules-arm 1  manual-rules 1",
    "\n  ensemble 1  report 1  manifest 1",
);

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn check_schema(path: &Path, kind: &str, got: u32, want: u32) -> Result<()> {
    if got != want {
        bail!(
            "{}: unsupported {kind} schema {got} (this build reads {want})",
            path.display()
        );
    }
    Ok(())
}

/// Rules mined from a trained forest, with the training-class shares the
/// ensemble needs to derive lift.
#[derive(Debug, Serialize, Deserialize)]
pub struct RfRulesDoc {
    pub schema: u32,
    pub source: String,
    pub config: ForestRuleConfig,
    pub n_rows: usize,
    pub class_shares: [f64; N_CLASSES],
    pub rules: Vec<ForestRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub humanized: Vec<String>,
}

/// Association rules with the discretization that defines their items.
#[derive(Debug, Serialize, Deserialize)]
pub struct ArmDoc {
    pub schema: u32,
    pub source: String,
    pub config: AssocConfig,
    pub n_transactions: usize,
    pub discretization: Discretization,
    pub catalog: ItemCatalog,
    pub rules: Vec<AssocRule>,
    pub display: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManualRulesDoc {
    pub schema: u32,
    pub source: String,
    pub rules: Vec<ManualRule>,
}

/// A rules file for `ensemble build`: any of the three sources,
/// recognized by its `source` tag (a bare JSON array reads as manual
/// rules).
pub enum RulesFile {
    Forest(RfRulesDoc),
    Assoc(ArmDoc),
    Manual(Vec<ManualRule>),
}

pub fn read_rules_file(path: &Path) -> Result<RulesFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    if value.is_array() {
        let rules: Vec<ManualRule> = serde_json::from_value(value)
            .with_context(|| format!("{}: bad manual rule list", path.display()))?;
        return Ok(RulesFile::Manual(rules));
    }
    let source = value
        .get("source")
        .and_then(|s| s.as_str())
        .with_context(|| format!("{}: missing \"source\" tag", path.display()))?
        .to_string();
    match source.as_str() {
        "rf" => {
            let doc: RfRulesDoc = serde_json::from_value(value)
                .with_context(|| format!("{}: bad rf rules document", path.display()))?;
            check_schema(path, "rules-rf", doc.schema, RULES_RF_SCHEMA)?;
            Ok(RulesFile::Forest(doc))
        }
        "arm" => {
            let doc: ArmDoc = serde_json::from_value(value)
                .with_context(|| format!("{}: bad arm rules document", path.display()))?;
            check_schema(path, "rules-arm", doc.schema, RULES_ARM_SCHEMA)?;
            Ok(RulesFile::Assoc(doc))
        }
        "manual" => {
            let doc: ManualRulesDoc = serde_json::from_value(value)
                .with_context(|| format!("{}: bad manual rules document", path.display()))?;
            check_schema(path, "manual-rules", doc.schema, MANUAL_RULES_SCHEMA)?;
            Ok(RulesFile::Manual(doc.rules))
        }
        other => bail!("{}: unknown rules source {other:?}", path.display()),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EnsembleDoc {
    pub schema: u32,
    pub model: EnsembleModel,
}

pub fn read_ensemble(path: &Path) -> Result<EnsembleModel> {
    let doc: EnsembleDoc = read_json(path)?;
    check_schema(path, "ensemble", doc.schema, ENSEMBLE_SCHEMA)?;
    Ok(doc.model)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub schema: u32,
    pub profile: Profile,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BreakdownDoc {
    pub schema: u32,
    pub breakdown: Breakdown,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImportanceDoc {
    pub schema: u32,
    pub report: ImportanceReport,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RadarDoc {
    pub schema: u32,
    pub radar: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConfusionDoc {
    pub schema: u32,
    pub confusion: ConfusionMatrix,
}

fn english_bound(v: f64) -> String {
    format!("{v}")
}

/// Renders one slot of a condition as an English clause.
fn slot_clause(feature: usize, slot: &Slot) -> String {
    let name = FEATURE_NAMES[feature];
    match slot {
        Slot::Steel(s) => format!("the steel type is {}", s.name()),
        Slot::Interval { lo, hi } => {
            let low = match lo {
                Endpoint::Unbounded => None,
                Endpoint::Inclusive(a) => Some(format!("at least {}", english_bound(*a))),
                Endpoint::Exclusive(a) => Some(format!("above {}", english_bound(*a))),
            };
            let high = match hi {
                Endpoint::Unbounded => None,
                Endpoint::Inclusive(b) => Some(format!("at most {}", english_bound(*b))),
                Endpoint::Exclusive(b) => Some(format!("below {}", english_bound(*b))),
            };
            match (low, high) {
                (Some(l), Some(h)) => format!("{name} is {l} and {h}"),
                (Some(l), None) => format!("{name} is {l}"),
                (None, Some(h)) => format!("{name} is {h}"),
                (None, None) => format!("{name} is unconstrained"),
            }
        }
    }
}

/// One English sentence per mined rule.
pub fn humanize_rule(rule: &ForestRule) -> String {
    let clauses: Vec<String> = rule
        .condition
        .slots
        .iter()
        .map(|(&f, slot)| slot_clause(f, slot))
        .collect();
    let when = if clauses.is_empty() {
        "always".to_string()
    } else {
        format!("when {}", clauses.join(" and "))
    };
    format!(
        "Predict {} {when}; the rule covers {:.1}% of the rows with {:.1}% error (importance {:.3}).",
        rule.prediction.name(),
        rule.freq * 100.0,
        rule.err * 100.0,
        rule.imp
    )
}

pub fn parse_fault(name: &str) -> Result<FaultLabel> {
    FaultLabel::from_name(name)
        .with_context(|| format!("unknown fault class {name:?} (expected one of the report names)"))
}

pub fn parse_feature(name: &str) -> Result<usize> {
    steelfault::feature_index(name)
        .with_context(|| format!("unknown feature {name:?} (expected a schema column name)"))
}
