//! End-to-end batch pipeline: every stage of the diagnosis workflow in
//! order, with one manifest listing each artifact and its digest.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use steelfault::ensemble::{evaluate_ensemble, MiningConfig};
use steelfault::explain::{
    breakdown, ceteris_paribus, default_ordering, partial_dependence, permutation_importance,
};
use steelfault::medoids::medoids_json;
use steelfault::rng::sub_rng;
use steelfault::rules::{discretize, filter_rules, mine_forest_rules, AssocConfig, ForestRuleConfig};
use steelfault::rules::apriori_mine;
use steelfault::tree::TreeParams;
use steelfault::{
    balance, compute_medoids, data, save_model, scale_for_radar, train_forest, BalanceConfig,
    FaultTable, FoldPlan, ForestParams, Format, LearnerSpec, Strategy,
};
use rand::Rng;

use crate::docs::{
    self, parse_fault, parse_feature, ArmDoc, BreakdownDoc, ImportanceDoc, ProfileDoc, RadarDoc,
    RfRulesDoc,
};
use crate::svg;

/// Whole-pipeline settings. Every key can come from a JSON config file
/// and every key has a matching command-line flag; flags win.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: String,
    pub format: String,
    pub out_dir: String,
    pub seed: u64,
    pub folds: usize,
    pub smote_k: usize,
    pub train_on: String,
    pub tune: bool,
    pub n_trees: usize,
    pub mtry: usize,
    pub min_node_size: usize,
    pub knn_k: usize,
    pub balance_within_folds: bool,
    pub grid_points: usize,
    pub pd_background: usize,
    pub importance_repeats: usize,
    pub profile_features: Vec<String>,
    pub breakdown_fault: String,
    pub rule_depth: usize,
    pub rule_delta: f64,
    pub rule_k: usize,
    pub arm_bins: usize,
    pub arm_min_support: f64,
    pub arm_min_confidence: f64,
    pub arm_max_len: usize,
    pub arm_top_k: usize,
    pub ensemble_mine_on_full: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: "data/steel_plates_faults.tsv".into(),
            format: "raw".into(),
            out_dir: "artifacts".into(),
            seed: 1,
            folds: 10,
            smote_k: 5,
            train_on: "smote".into(),
            tune: false,
            n_trees: 186,
            mtry: 5,
            min_node_size: 1,
            knn_k: 5,
            balance_within_folds: false,
            grid_points: 101,
            pd_background: 400,
            importance_repeats: 5,
            profile_features: vec!["Length_of_Conveyer".into(), "Steel_Plate_Thickness".into()],
            breakdown_fault: "Pastry".into(),
            rule_depth: 6,
            rule_delta: 0.01,
            rule_k: 20,
            arm_bins: 20,
            arm_min_support: 0.01,
            arm_min_confidence: 0.85,
            arm_max_len: 4,
            arm_top_k: 10,
            ensemble_mine_on_full: false,
        }
    }
}

/// Flag-side overrides; any set field replaces the config value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct PipelineOverrides {
    /// Input data file.
    #[arg(long)]
    pub data: Option<String>,
    /// Input layout: raw or cleaned.
    #[arg(long)]
    pub format: Option<String>,
    /// Artifact directory.
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Master seed; every stage derives its own stream from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cross-validation fold count.
    #[arg(long)]
    pub folds: Option<usize>,
    /// SMOTE neighbour count.
    #[arg(long)]
    pub smote_k: Option<usize>,
    /// Dataset the model trains on: original, undersample, oversample, smote.
    #[arg(long)]
    pub train_on: Option<String>,
    /// Grid-search forest hyperparameters before training.
    #[arg(long)]
    pub tune: Option<bool>,
    /// Trees in the forest.
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Candidate features per split.
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Minimum rows per leaf.
    #[arg(long)]
    pub min_node_size: Option<usize>,
    /// k for the nearest-neighbour benchmark row.
    #[arg(long)]
    pub knn_k: Option<usize>,
    /// Balance inside each training fold instead of before splitting.
    #[arg(long)]
    pub balance_within_folds: Option<bool>,
    /// Profile grid resolution.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Background sample size for partial dependence.
    #[arg(long)]
    pub pd_background: Option<usize>,
    /// Permutations per feature for importance.
    #[arg(long)]
    pub importance_repeats: Option<usize>,
    /// Features to profile (repeatable).
    #[arg(long = "profile-feature")]
    pub profile_features: Option<Vec<String>>,
    /// Fault whose medoid anchors the profiles and breakdown.
    #[arg(long)]
    pub breakdown_fault: Option<String>,
    /// Maximum mined rule depth.
    #[arg(long)]
    pub rule_depth: Option<usize>,
    /// Pruning tolerance for mined rules.
    #[arg(long)]
    pub rule_delta: Option<f64>,
    /// Mined rules kept after scoring.
    #[arg(long)]
    pub rule_k: Option<usize>,
    /// Equal-frequency bins for association mining.
    #[arg(long)]
    pub arm_bins: Option<usize>,
    /// Minimum association rule support.
    #[arg(long)]
    pub arm_min_support: Option<f64>,
    /// Minimum association rule confidence.
    #[arg(long)]
    pub arm_min_confidence: Option<f64>,
    /// Maximum association itemset length.
    #[arg(long)]
    pub arm_max_len: Option<usize>,
    /// Association rules kept per class.
    #[arg(long)]
    pub arm_top_k: Option<usize>,
    /// Mine the ensemble rule table once on the full data.
    #[arg(long)]
    pub ensemble_mine_on_full: Option<bool>,
}

macro_rules! apply_fields {
    ($cfg:ident, $ov:ident, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $ov.$field.clone() {
            $cfg.$field = v;
        })+
    };
}

pub fn load_config(path: Option<&Path>, overrides: &PipelineOverrides) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => docs::read_json(p)?,
        None => PipelineConfig::default(),
    };
    apply_fields!(
        cfg, overrides, data, format, out_dir, seed, folds, smote_k, train_on, tune, n_trees,
        mtry, min_node_size, knn_k, balance_within_folds, grid_points, pd_background,
        importance_repeats, profile_features, breakdown_fault, rule_depth, rule_delta, rule_k,
        arm_bins, arm_min_support, arm_min_confidence, arm_max_len, arm_top_k,
        ensemble_mine_on_full
    );
    Ok(cfg)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub config: PipelineConfig,
    pub config_sha256: String,
    pub artifacts: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

struct ArtifactLog {
    out_dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl ArtifactLog {
    fn record(&mut self, name: &str, kind: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        let bytes =
            std::fs::read(&path).with_context(|| format!("cannot hash {}", path.display()))?;
        self.entries.push(ManifestEntry {
            name: name.to_string(),
            kind: kind.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }
}

fn stage<T>(name: &str, body: impl FnOnce() -> Result<T>) -> Result<T> {
    body().with_context(|| format!("stage {name} failed"))
}

fn provenance_column(tags: &[steelfault::balance::Provenance]) -> Vec<String> {
    tags.iter()
        .map(|t| {
            match t {
                steelfault::balance::Provenance::Original => "original",
                steelfault::balance::Provenance::Duplicated => "duplicated",
                steelfault::balance::Provenance::Synthetic => "synthetic",
            }
            .to_string()
        })
        .collect()
}

fn dataset_by_name<'a>(
    name: &str,
    original: &'a FaultTable,
    balanced: &'a [(Strategy, FaultTable)],
) -> Result<&'a FaultTable> {
    if name == "original" {
        return Ok(original);
    }
    balanced
        .iter()
        .find(|(s, _)| strategy_name(*s) == name)
        .map(|(_, t)| t)
        .with_context(|| format!("unknown dataset {name:?}"))
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::None => "original",
        Strategy::Undersample => "undersample",
        Strategy::Oversample => "oversample",
        Strategy::Smote => "smote",
    }
}

/// Runs every stage and writes the manifest; returns its path and the
/// hex digest of its bytes.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(PathBuf, String)> {
    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut log = ArtifactLog { out_dir: out_dir.clone(), entries: Vec::new() };
    let seed = cfg.seed;

    let table = stage("ingest", || {
        let format: Format = cfg.format.parse()?;
        let table = data::ingest(&cfg.data, format)?;
        data::export_cleaned(&table, out_dir.join("original.csv"), b',', None)?;
        Ok(table)
    })?;
    log.record("original.csv", "dataset")?;

    let balanced = stage("balance", || {
        let mut out = Vec::new();
        for (i, strategy) in [Strategy::Undersample, Strategy::Oversample, Strategy::Smote]
            .into_iter()
            .enumerate()
        {
            let mut bcfg =
                BalanceConfig::new(strategy, sub_rng(seed, "balance", i as u64).random());
            bcfg.k_neighbors = cfg.smote_k;
            let result = balance(&table, &bcfg)?;
            let name = format!("{}.csv", strategy_name(strategy));
            let tags = provenance_column(&result.provenance);
            data::export_cleaned(
                &result.table,
                out_dir.join(&name),
                b',',
                Some(("Provenance", &tags)),
            )?;
            out.push((strategy, result.table));
        }
        Ok(out)
    })?;
    for (strategy, _) in &balanced {
        log.record(&format!("{}.csv", strategy_name(*strategy)), "dataset")?;
    }

    let forest_params = ForestParams {
        n_trees: cfg.n_trees,
        mtry: cfg.mtry,
        min_node_size: cfg.min_node_size,
        seed,
    };
    let grid = stage("benchmark", || {
        let learners = [
            LearnerSpec::Forest(forest_params),
            LearnerSpec::Tree { params: TreeParams::baseline(), seed },
            LearnerSpec::Knn { k: cfg.knn_k },
        ];
        let grid = steelfault::benchmark(
            &table,
            &learners,
            seed,
            cfg.smote_k,
            cfg.balance_within_folds,
        )?;
        std::fs::write(out_dir.join("benchmark_grid.csv"), grid.to_csv())?;
        for (l, learner) in grid.learners.iter().enumerate() {
            for (d, dataset) in grid.datasets.iter().enumerate() {
                let name = format!("confusion_{learner}_{dataset}.csv");
                std::fs::write(out_dir.join(&name), grid.confusion[l][d].to_csv())?;
            }
        }
        Ok(grid)
    })?;
    log.record("benchmark_grid.csv", "grid")?;
    for learner in &grid.learners {
        for dataset in &grid.datasets {
            log.record(&format!("confusion_{learner}_{dataset}.csv"), "confusion")?;
        }
    }

    let (model, train_table) = stage("train", || {
        let train_table = dataset_by_name(&cfg.train_on, &table, &balanced)?.clone();
        let mut params = forest_params;
        params.seed = sub_rng(seed, "train", 0).random();
        if cfg.tune {
            let grid = steelfault::tune::ForestGrid {
                n_trees: vec![100, cfg.n_trees, 250],
                mtry: vec![4, cfg.mtry, 6],
                min_node_size: vec![cfg.min_node_size],
            };
            let plan = FoldPlan::stratified(&train_table.labels, cfg.folds, seed)?;
            let outcome = steelfault::tune_forest(&train_table, &grid, &plan, params.seed)?;
            params = outcome.best;
        }
        let model = train_forest(&train_table, &params)?;
        save_model(&model, out_dir.join("model.json"))?;
        Ok((model, train_table))
    })?;
    log.record("model.json", "model")?;

    let medoids = stage("medoids", || {
        let medoids = compute_medoids(&table)?;
        docs::write_json(
            &out_dir.join("medoids.json"),
            &serde_json::json!({ "schema": docs::MEDOIDS_SCHEMA, "medoids": medoids_json(&medoids) }),
        )?;
        let scaled = scale_for_radar(&medoids, &table)?;
        let mut radar = serde_json::Map::new();
        for (label, values) in &scaled {
            let mut row = serde_json::Map::new();
            for (f, name) in steelfault::FEATURE_NAMES.iter().enumerate() {
                row.insert(name.to_string(), serde_json::json!(values[f]));
            }
            radar.insert(label.name().to_string(), serde_json::Value::Object(row));
        }
        docs::write_json(
            &out_dir.join("radar.json"),
            &RadarDoc { schema: docs::RADAR_SCHEMA, radar },
        )?;
        std::fs::write(out_dir.join("radar.svg"), svg::radar_svg(&scaled))?;
        Ok(medoids)
    })?;
    log.record("medoids.json", "medoids")?;
    log.record("radar.json", "radar")?;
    log.record("radar.svg", "svg")?;

    let importance = stage("importance", || {
        let report = permutation_importance(
            &model,
            &train_table,
            cfg.importance_repeats,
            sub_rng(seed, "importance-stage", 0).random(),
        )?;
        docs::write_json(
            &out_dir.join("importance.json"),
            &ImportanceDoc {
                schema: docs::IMPORTANCE_SCHEMA,
                report: report.clone(),
                feature_names: steelfault::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            },
        )?;
        Ok(report)
    })?;
    log.record("importance.json", "importance")?;

    let anchor_fault = parse_fault(&cfg.breakdown_fault)?;
    let anchor = medoids
        .iter()
        .find(|m| m.fault == anchor_fault)
        .context("anchor fault has no medoid")?
        .clone();

    let mut profile_files = Vec::new();
    stage("profiles", || {
        for (i, feature_name) in cfg.profile_features.iter().enumerate() {
            let feature = parse_feature(feature_name)?;
            let cp = ceteris_paribus(&model, &anchor, feature, cfg.grid_points, &train_table)?;
            let cp_json = format!("cp_{feature_name}.json");
            let cp_svg = format!("cp_{feature_name}.svg");
            docs::write_json(
                &out_dir.join(&cp_json),
                &ProfileDoc { schema: docs::PROFILE_SCHEMA, profile: cp.clone() },
            )?;
            std::fs::write(
                out_dir.join(&cp_svg),
                svg::profile_svg(
                    &cp,
                    &format!("Ceteris Paribus: {feature_name} ({} medoid)", anchor.fault.name()),
                ),
            )?;
            let m = cfg.pd_background.clamp(1, train_table.len());
            let pd = partial_dependence(
                &model,
                &train_table,
                feature,
                cfg.grid_points,
                m,
                sub_rng(seed, "pd-stage", i as u64).random(),
            )?;
            let pd_json = format!("pd_{feature_name}.json");
            let pd_svg = format!("pd_{feature_name}.svg");
            docs::write_json(
                &out_dir.join(&pd_json),
                &ProfileDoc { schema: docs::PROFILE_SCHEMA, profile: pd.clone() },
            )?;
            std::fs::write(
                out_dir.join(&pd_svg),
                svg::profile_svg(&pd, &format!("Partial Dependence: {feature_name}")),
            )?;
            profile_files.extend([cp_json, cp_svg, pd_json, pd_svg]);
        }
        Ok(())
    })?;
    for name in &profile_files {
        let kind = if name.ends_with(".svg") { "svg" } else { "profile" };
        log.record(name, kind)?;
    }

    let bd_json = format!("bd_{}.json", cfg.breakdown_fault);
    let bd_svg = format!("bd_{}.svg", cfg.breakdown_fault);
    stage("breakdown", || {
        let ordering = default_ordering(&importance);
        let bd = breakdown(&model, &anchor, anchor_fault, &ordering, &train_table)?;
        docs::write_json(
            &out_dir.join(&bd_json),
            &BreakdownDoc { schema: docs::BREAKDOWN_SCHEMA, breakdown: bd.clone() },
        )?;
        std::fs::write(out_dir.join(&bd_svg), svg::breakdown_svg(&bd))?;
        Ok(())
    })?;
    log.record(&bd_json, "breakdown")?;
    log.record(&bd_svg, "svg")?;

    stage("mine-rf", || {
        let rcfg = ForestRuleConfig {
            max_depth: cfg.rule_depth,
            delta: cfg.rule_delta,
            k: cfg.rule_k,
        };
        let rules = mine_forest_rules(&model, &train_table, &rcfg)?;
        let counts = train_table.class_counts()?;
        let n = train_table.len();
        let mut class_shares = [0.0; steelfault::N_CLASSES];
        for (c, &count) in counts.iter().enumerate() {
            class_shares[c] = count as f64 / n as f64;
        }
        let humanized = rules.iter().map(docs::humanize_rule).collect();
        docs::write_json(
            &out_dir.join("rules_rf.json"),
            &RfRulesDoc {
                schema: docs::RULES_RF_SCHEMA,
                source: "rf".into(),
                config: rcfg,
                n_rows: n,
                class_shares,
                rules,
                humanized,
            },
        )?;
        Ok(())
    })?;
    log.record("rules_rf.json", "rules")?;

    stage("mine-arm", || {
        let acfg = AssocConfig {
            bins: cfg.arm_bins,
            min_support: cfg.arm_min_support,
            min_confidence: cfg.arm_min_confidence,
            max_len: cfg.arm_max_len,
        };
        let (disc, tt) = discretize(&train_table, acfg.bins)?;
        let mined = apriori_mine(&tt, &acfg)?;
        let rules = filter_rules(&mined, cfg.arm_top_k, acfg.max_len);
        let display = rules.iter().map(|r| r.display(&tt.catalog)).collect();
        docs::write_json(
            &out_dir.join("arm.json"),
            &ArmDoc {
                schema: docs::RULES_ARM_SCHEMA,
                source: "arm".into(),
                config: acfg,
                n_transactions: tt.n,
                discretization: disc,
                catalog: tt.catalog.clone(),
                rules,
                display,
            },
        )?;
        Ok(())
    })?;
    log.record("arm.json", "rules")?;

    stage("ensemble", || {
        let mut mcfg = if cfg.ensemble_mine_on_full {
            MiningConfig::full_data(seed)
        } else {
            MiningConfig::per_fold(seed)
        };
        mcfg.forest = forest_params;
        let eval_table = if cfg.ensemble_mine_on_full { &table } else { &train_table };
        let plan = FoldPlan::stratified(&eval_table.labels, cfg.folds, seed)?;
        let report = evaluate_ensemble(eval_table, &plan, &mcfg)?;
        docs::write_json(
            &out_dir.join("ensemble.json"),
            &serde_json::json!({ "schema": docs::REPORT_SCHEMA, "report": report }),
        )?;
        std::fs::write(
            out_dir.join("confusion_ensemble.svg"),
            svg::confusion_svg(&report.confusion, "Ensemble cross-validated confusion"),
        )?;
        Ok(())
    })?;
    log.record("ensemble.json", "ensemble-report")?;
    log.record("confusion_ensemble.svg", "svg")?;

    let manifest_path = out_dir.join("manifest.json");
    let digest = stage("manifest", || {
        let config_json = serde_json::to_string(cfg)?;
        let manifest = Manifest {
            schema: docs::MANIFEST_SCHEMA,
            config: cfg.clone(),
            config_sha256: sha256_hex(config_json.as_bytes()),
            artifacts: log.entries.split_off(0),
        };
        docs::write_json(&manifest_path, &manifest)?;
        let bytes = std::fs::read(&manifest_path)?;
        Ok(sha256_hex(&bytes))
    })?;
    Ok((manifest_path, digest))
}
