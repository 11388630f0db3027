//! Command-line frontend for the fault-diagnosis pipeline.

pub mod docs;
pub mod pipeline;
pub mod svg;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use steelfault::ensemble::{
    compile_manual, compile_rule_table, evaluate_ensemble, CompiledRule, EnsembleModel,
    ManualRule, MiningConfig,
};
use steelfault::explain::{
    breakdown, ceteris_paribus, default_ordering, partial_dependence, permutation_importance,
};
use steelfault::medoids::medoids_json;
use steelfault::rules::{
    apriori_mine, discretize, filter_rules, mine_forest_rules, AssocConfig, ForestRuleConfig,
};
use steelfault::tree::TreeParams;
use steelfault::{
    balance, compute_medoids, data, load_model, save_model, scale_for_radar, train_forest,
    BalanceConfig, ConfusionMatrix, FaultLabel, FaultTable, FoldPlan, ForestParams, Format,
    LearnerSpec, N_CLASSES,
};

use docs::{
    parse_fault, parse_feature, ArmDoc, BreakdownDoc, EnsembleDoc, ImportanceDoc, ProfileDoc,
    RadarDoc, RfRulesDoc, RulesFile,
};
use pipeline::{PipelineOverrides};

#[derive(Parser)]
#[command(
    name = "steelfault",
    version,
    long_version = docs::LONG_VERSION,
    about = "Fault diagnosis for steel plates: balancing, learners, explanations, rules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Input data file.
    #[arg(long)]
    data: PathBuf,
    /// Input layout: raw or cleaned.
    #[arg(long, default_value = "raw")]
    format: String,
}

impl DataArgs {
    fn load(&self) -> Result<FaultTable> {
        let format: Format = self.format.parse()?;
        Ok(data::ingest(&self.data, format)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a data file and report its shape; optionally export the
    /// cleaned layout.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Write the cleaned 28-column file here.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Field delimiter for the export.
        #[arg(long, default_value = ",")]
        delimiter: char,
    },
    /// Balance class counts and write the result with a provenance column.
    Balance {
        #[command(flatten)]
        data: DataArgs,
        /// under, over, or smote.
        #[arg(long)]
        strategy: String,
        /// Neighbours per synthetic sample.
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate every learner on the original and balanced datasets.
    Benchmark {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        smote_k: usize,
        /// Balance inside each training fold instead of before splitting.
        #[arg(long)]
        balance_within_folds: bool,
        #[arg(long, default_value_t = 186)]
        n_trees: usize,
        #[arg(long, default_value_t = 5)]
        mtry: usize,
        #[arg(long, default_value_t = 1)]
        min_node_size: usize,
        #[arg(long, default_value_t = 5)]
        knn_k: usize,
        /// Accuracy grid CSV.
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-cell confusion CSVs.
        #[arg(long)]
        confusion_dir: Option<PathBuf>,
    },
    /// Train a random forest and save it as versioned JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 186)]
        n_trees: usize,
        #[arg(long, default_value_t = 5)]
        mtry: usize,
        #[arg(long, default_value_t = 1)]
        min_node_size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Grid-search n_trees and mtry around the given values first.
        #[arg(long)]
        tune: bool,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute per-class medoids; optionally scaled radar data and chart.
    Medoids {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Scaled radar JSON.
        #[arg(long)]
        radar: Option<PathBuf>,
        /// Radar chart SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Model-agnostic explanations.
    Explain {
        #[command(subcommand)]
        what: ExplainCommand,
    },
    /// Extract rules from a forest or mine association rules.
    Mine {
        /// rf or arm.
        #[arg(long)]
        source: String,
        #[command(flatten)]
        data: DataArgs,
        /// Trained model (rf source).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Maximum rule depth (rf).
        #[arg(long, default_value_t = 6)]
        max_depth: usize,
        /// Pruning tolerance (rf).
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Rules kept after scoring (rf).
        #[arg(long, default_value_t = 20)]
        k: usize,
        /// Append an English sentence per rule (rf).
        #[arg(long)]
        humanize: bool,
        /// Equal-frequency bins (arm).
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Minimum support (arm).
        #[arg(long, default_value_t = 0.01)]
        min_support: f64,
        /// Minimum confidence (arm).
        #[arg(long, default_value_t = 0.85)]
        min_conf: f64,
        /// Maximum itemset length (arm).
        #[arg(long, default_value_t = 4)]
        max_len: usize,
        /// Keep only this many rules per class (arm).
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build or evaluate the rule-table ensemble.
    Ensemble {
        #[command(subcommand)]
        what: EnsembleCommand,
    },
    /// Render a JSON artifact (or confusion CSV) as a static SVG chart.
    Render {
        #[arg(long)]
        input: PathBuf,
        /// auto, cp, pd, bd, radar, or confusion.
        #[arg(long, default_value = "auto")]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage end to end and write a manifest.
    Pipeline {
        /// JSON config; flags override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: PipelineOverrides,
    },
}

#[derive(Subcommand)]
enum ExplainCommand {
    /// Permutation importance under multiclass log-loss.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ceteris Paribus profile anchored at a class medoid.
    Cp {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Feature to sweep, by schema name.
        #[arg(long)]
        feature: String,
        /// Fault class whose medoid anchors the profile.
        #[arg(long)]
        medoid: String,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Partial dependence profile.
    Pd {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        feature: String,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Background rows averaged per grid point (0 = all rows).
        #[arg(long, default_value_t = 0)]
        background: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Breakdown attribution at a class medoid.
    Bd {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Fault class whose medoid is explained.
        #[arg(long)]
        medoid: String,
        /// Probability to attribute (defaults to the medoid's own class).
        #[arg(long)]
        target: Option<String>,
        /// Importance repeats used to pick the replacement order.
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum EnsembleCommand {
    /// Compile rule files and a fallback model into an ensemble.
    Build {
        /// Rule files: mined forest rules, association rules, or manual
        /// rules (repeatable, any mix).
        #[arg(long, num_args = 1.., required = true)]
        rules: Vec<PathBuf>,
        /// Fallback forest model.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the ensemble with per-fold (or whole-data) mining.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Mine the rule table once on the full data instead of per fold.
        #[arg(long)]
        mine_on_full: bool,
        /// Manual rules JSON merged into the mined table.
        #[arg(long)]
        manual: Option<PathBuf>,
        #[arg(long)]
        n_trees: Option<usize>,
        #[arg(long)]
        mtry: Option<usize>,
        #[arg(long)]
        min_node_size: Option<usize>,
        #[arg(long)]
        rule_depth: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        min_cover: Option<usize>,
        #[arg(long)]
        max_err: Option<f64>,
        #[arg(long)]
        use_assoc: Option<bool>,
        #[arg(long)]
        assoc_bins: Option<usize>,
        #[arg(long)]
        assoc_min_support: Option<f64>,
        #[arg(long)]
        assoc_min_confidence: Option<f64>,
        #[arg(long)]
        assoc_top_k: Option<usize>,
        /// Report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run() -> Result<()> {
    dispatch(Cli::parse())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { data, export, delimiter } => ingest(data, export, delimiter),
        Command::Balance { data, strategy, k, seed, out } => {
            balance_cmd(data, &strategy, k, seed, &out)
        }
        Command::Benchmark {
            data,
            seed,
            smote_k,
            balance_within_folds,
            n_trees,
            mtry,
            min_node_size,
            knn_k,
            out,
            confusion_dir,
        } => benchmark_cmd(
            data,
            seed,
            smote_k,
            balance_within_folds,
            ForestParams { n_trees, mtry, min_node_size, seed },
            knn_k,
            &out,
            confusion_dir.as_deref(),
        ),
        Command::Train { data, n_trees, mtry, min_node_size, seed, tune, folds, out } => {
            train_cmd(
                data,
                ForestParams { n_trees, mtry, min_node_size, seed },
                tune,
                folds,
                &out,
            )
        }
        Command::Medoids { data, out, radar, svg } => {
            medoids_cmd(data, &out, radar.as_deref(), svg.as_deref())
        }
        Command::Explain { what } => explain_cmd(what),
        Command::Mine {
            source,
            data,
            model,
            max_depth,
            delta,
            k,
            humanize,
            bins,
            min_support,
            min_conf,
            max_len,
            top_k,
            out,
        } => match source.as_str() {
            "rf" => {
                let model = model.context("--source rf requires --model")?;
                mine_rf_cmd(data, &model, ForestRuleConfig { max_depth, delta, k }, humanize, &out)
            }
            "arm" => mine_arm_cmd(
                data,
                AssocConfig { bins, min_support, min_confidence: min_conf, max_len },
                top_k,
                &out,
            ),
            other => bail!("unknown mine source {other:?} (expected rf or arm)"),
        },
        Command::Ensemble { what } => match what {
            EnsembleCommand::Build { rules, model, out } => ensemble_build(&rules, &model, &out),
            EnsembleCommand::Eval {
                data,
                seed,
                folds,
                mine_on_full,
                manual,
                n_trees,
                mtry,
                min_node_size,
                rule_depth,
                delta,
                min_cover,
                max_err,
                use_assoc,
                assoc_bins,
                assoc_min_support,
                assoc_min_confidence,
                assoc_top_k,
                out,
            } => {
                let mut cfg = if mine_on_full {
                    MiningConfig::full_data(seed)
                } else {
                    MiningConfig::per_fold(seed)
                };
                if let Some(v) = n_trees {
                    cfg.forest.n_trees = v;
                }
                if let Some(v) = mtry {
                    cfg.forest.mtry = v;
                }
                if let Some(v) = min_node_size {
                    cfg.forest.min_node_size = v;
                }
                if let Some(v) = rule_depth {
                    cfg.rule_depth = v;
                }
                if let Some(v) = delta {
                    cfg.delta = v;
                }
                if let Some(v) = min_cover {
                    cfg.min_cover = v;
                }
                if let Some(v) = max_err {
                    cfg.max_err = v;
                }
                if let Some(v) = use_assoc {
                    cfg.use_assoc = v;
                }
                if let Some(v) = assoc_bins {
                    cfg.assoc.bins = v;
                }
                if let Some(v) = assoc_min_support {
                    cfg.assoc.min_support = v;
                }
                if let Some(v) = assoc_min_confidence {
                    cfg.assoc_min_confidence = v;
                }
                if let Some(v) = assoc_top_k {
                    cfg.assoc_top_k = v;
                }
                if let Some(path) = manual {
                    cfg.manual = read_manual_rules(&path)?;
                }
                ensemble_eval(data, seed, folds, cfg, out.as_deref())
            }
        },
        Command::Render { input, kind, out } => render_cmd(&input, &kind, &out),
        Command::Pipeline { config, overrides } => {
            let cfg = pipeline::load_config(config.as_deref(), &overrides)?;
            let (path, digest) = pipeline::run_pipeline(&cfg)?;
            println!("manifest {}", path.display());
            println!("manifest sha256 {digest}");
            Ok(())
        }
    }
}

fn ingest(args: DataArgs, export: Option<PathBuf>, delimiter: char) -> Result<()> {
    let table = args.load()?;
    let counts = table.class_counts()?;
    println!("rows {}", table.len());
    for (c, &label) in FaultLabel::ALL.iter().enumerate() {
        println!("{} {}", label.name(), counts[c]);
    }
    if let Some(path) = export {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).ok();
        }
        data::export_cleaned(&table, &path, delimiter as u8, None)?;
        println!("exported {}", path.display());
    }
    Ok(())
}

fn balance_cmd(args: DataArgs, strategy: &str, k: usize, seed: u64, out: &Path) -> Result<()> {
    let table = args.load()?;
    let mut cfg = BalanceConfig::new(strategy.parse()?, seed);
    cfg.k_neighbors = k;
    let result = balance(&table, &cfg)?;
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).ok();
    }
    let tags: Vec<String> = result
        .provenance
        .iter()
        .map(|t| format!("{t:?}").to_lowercase())
        .collect();
    data::export_cleaned(&result.table, out, b',', Some(("Provenance", &tags)))?;
    println!(
        "{} rows -> {} rows ({} per class) {}",
        table.len(),
        result.table.len(),
        result.table.len() / N_CLASSES,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn benchmark_cmd(
    args: DataArgs,
    seed: u64,
    smote_k: usize,
    balance_within_folds: bool,
    forest: ForestParams,
    knn_k: usize,
    out: &Path,
    confusion_dir: Option<&Path>,
) -> Result<()> {
    let table = args.load()?;
    let learners = [
        LearnerSpec::Forest(forest),
        LearnerSpec::Tree { params: TreeParams::baseline(), seed },
        LearnerSpec::Knn { k: knn_k },
    ];
    let grid = steelfault::benchmark(&table, &learners, seed, smote_k, balance_within_folds)?;
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).ok();
    }
    std::fs::write(out, grid.to_csv()).with_context(|| format!("cannot write {}", out.display()))?;
    if let Some(dir) = confusion_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
        for (l, learner) in grid.learners.iter().enumerate() {
            for (d, dataset) in grid.datasets.iter().enumerate() {
                let path = dir.join(format!("confusion_{learner}_{dataset}.csv"));
                std::fs::write(&path, grid.confusion[l][d].to_csv())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
    }
    print!("{grid}");
    Ok(())
}

fn train_cmd(
    args: DataArgs,
    mut params: ForestParams,
    tune: bool,
    folds: usize,
    out: &Path,
) -> Result<()> {
    let table = args.load()?;
    if tune {
        let grid = steelfault::ForestGrid {
            n_trees: vec![100, params.n_trees, 250],
            mtry: vec![4, params.mtry, 6],
            min_node_size: vec![params.min_node_size],
        };
        let plan = FoldPlan::stratified(&table.labels, folds, params.seed)?;
        let outcome = steelfault::tune_forest(&table, &grid, &plan, params.seed)?;
        println!("tuned to {:?} (cv accuracy {:.4})", outcome.best, outcome.best_accuracy);
        params = outcome.best;
    }
    let model = train_forest(&table, &params)?;
    save_model(&model, out)?;
    println!(
        "trained {} trees (oob error {:.4}) -> {}",
        model.params.n_trees,
        model.oob_error,
        out.display()
    );
    Ok(())
}

fn medoids_cmd(
    args: DataArgs,
    out: &Path,
    radar: Option<&Path>,
    svg_path: Option<&Path>,
) -> Result<()> {
    let table = args.load()?;
    let medoids = compute_medoids(&table)?;
    docs::write_json(
        out,
        &serde_json::json!({ "schema": docs::MEDOIDS_SCHEMA, "medoids": medoids_json(&medoids) }),
    )?;
    println!("{} medoids -> {}", medoids.len(), out.display());
    if radar.is_some() || svg_path.is_some() {
        let scaled = scale_for_radar(&medoids, &table)?;
        if let Some(path) = radar {
            let mut map = serde_json::Map::new();
            for (label, values) in &scaled {
                let mut row = serde_json::Map::new();
                for (f, name) in steelfault::FEATURE_NAMES.iter().enumerate() {
                    row.insert(name.to_string(), serde_json::json!(values[f]));
                }
                map.insert(label.name().to_string(), serde_json::Value::Object(row));
            }
            docs::write_json(path, &RadarDoc { schema: docs::RADAR_SCHEMA, radar: map })?;
            println!("radar data -> {}", path.display());
        }
        if let Some(path) = svg_path {
            std::fs::write(path, svg::radar_svg(&scaled))
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("radar chart -> {}", path.display());
        }
    }
    Ok(())
}

fn anchor_medoid(table: &FaultTable, fault: &str) -> Result<steelfault::Medoid> {
    let label = parse_fault(fault)?;
    compute_medoids(table)?
        .into_iter()
        .find(|m| m.fault == label)
        .context("fault has no medoid")
}

fn explain_cmd(what: ExplainCommand) -> Result<()> {
    match what {
        ExplainCommand::Importance { model, data, repeats, seed, out } => {
            let table = data.load()?;
            let model = load_model(&model)?;
            let report = permutation_importance(&model, &table, repeats, seed)?;
            let top: Vec<&str> = report
                .top_k(5)
                .into_iter()
                .map(|f| steelfault::FEATURE_NAMES[f])
                .collect();
            docs::write_json(
                &out,
                &ImportanceDoc {
                    schema: docs::IMPORTANCE_SCHEMA,
                    report,
                    feature_names: steelfault::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
                },
            )?;
            println!("top features: {}", top.join(", "));
            println!("importance -> {}", out.display());
            Ok(())
        }
        ExplainCommand::Cp { model, data, feature, medoid, grid, out } => {
            let table = data.load()?;
            let model = load_model(&model)?;
            let anchor = anchor_medoid(&table, &medoid)?;
            let f = parse_feature(&feature)?;
            let profile = ceteris_paribus(&model, &anchor, f, grid, &table)?;
            docs::write_json(&out, &ProfileDoc { schema: docs::PROFILE_SCHEMA, profile })?;
            println!("ceteris paribus {feature} @ {medoid} -> {}", out.display());
            Ok(())
        }
        ExplainCommand::Pd { model, data, feature, grid, background, seed, out } => {
            let table = data.load()?;
            let model = load_model(&model)?;
            let f = parse_feature(&feature)?;
            let m = if background == 0 { table.len() } else { background.min(table.len()) };
            let profile = partial_dependence(&model, &table, f, grid, m, seed)?;
            docs::write_json(&out, &ProfileDoc { schema: docs::PROFILE_SCHEMA, profile })?;
            println!("partial dependence {feature} -> {}", out.display());
            Ok(())
        }
        ExplainCommand::Bd { model, data, medoid, target, repeats, seed, out } => {
            let table = data.load()?;
            let model = load_model(&model)?;
            let anchor = anchor_medoid(&table, &medoid)?;
            let target = match target {
                Some(name) => parse_fault(&name)?,
                None => anchor.fault,
            };
            let importance = permutation_importance(&model, &table, repeats, seed)?;
            let ordering = default_ordering(&importance);
            let bd = breakdown(&model, &anchor, target, &ordering, &table)?;
            println!(
                "intercept {:.4} -> prediction {:.4} (completeness error {:.2e})",
                bd.intercept,
                bd.final_prediction,
                bd.completeness_error()
            );
            docs::write_json(&out, &BreakdownDoc { schema: docs::BREAKDOWN_SCHEMA, breakdown: bd })?;
            println!("breakdown -> {}", out.display());
            Ok(())
        }
    }
}

fn mine_rf_cmd(
    args: DataArgs,
    model_path: &Path,
    cfg: ForestRuleConfig,
    humanize: bool,
    out: &Path,
) -> Result<()> {
    let table = args.load()?;
    let model = load_model(model_path)?;
    let rules = mine_forest_rules(&model, &table, &cfg)?;
    let counts = table.class_counts()?;
    let mut class_shares = [0.0; N_CLASSES];
    for (c, &count) in counts.iter().enumerate() {
        class_shares[c] = count as f64 / table.len() as f64;
    }
    let humanized: Vec<String> = if humanize {
        rules.iter().map(docs::humanize_rule).collect()
    } else {
        Vec::new()
    };
    if humanize {
        for line in &humanized {
            println!("{line}");
        }
    }
    println!("{} rules -> {}", rules.len(), out.display());
    docs::write_json(
        out,
        &RfRulesDoc {
            schema: docs::RULES_RF_SCHEMA,
            source: "rf".into(),
            config: cfg,
            n_rows: table.len(),
            class_shares,
            rules,
            humanized,
        },
    )
}

fn mine_arm_cmd(
    args: DataArgs,
    cfg: AssocConfig,
    top_k: Option<usize>,
    out: &Path,
) -> Result<()> {
    let table = args.load()?;
    let (disc, tt) = discretize(&table, cfg.bins)?;
    let mined = apriori_mine(&tt, &cfg)?;
    let rules = match top_k {
        Some(k) => filter_rules(&mined, k, cfg.max_len),
        None => mined,
    };
    let display: Vec<String> = rules.iter().map(|r| r.display(&tt.catalog)).collect();
    println!("{} rules -> {}", rules.len(), out.display());
    docs::write_json(
        out,
        &ArmDoc {
            schema: docs::RULES_ARM_SCHEMA,
            source: "arm".into(),
            config: cfg,
            n_transactions: tt.n,
            discretization: disc,
            catalog: tt.catalog.clone(),
            rules,
            display,
        },
    )
}

fn read_manual_rules(path: &Path) -> Result<Vec<ManualRule>> {
    match docs::read_rules_file(path)? {
        RulesFile::Manual(rules) => Ok(rules),
        _ => bail!("{}: expected manual rules", path.display()),
    }
}

fn ensemble_build(rule_files: &[PathBuf], model_path: &Path, out: &Path) -> Result<()> {
    let mut compiled: Vec<CompiledRule> = Vec::new();
    for path in rule_files {
        match docs::read_rules_file(path)? {
            RulesFile::Forest(doc) => {
                for rule in &doc.rules {
                    let share = doc.class_shares[rule.prediction.index()];
                    compiled.push(CompiledRule::from_forest_rule(rule, share, compiled.len()));
                }
            }
            RulesFile::Assoc(doc) => {
                for rule in &doc.rules {
                    compiled.push(CompiledRule::from_assoc_rule(rule, &doc.catalog, compiled.len())?);
                }
            }
            RulesFile::Manual(rules) => compiled.extend(compile_manual(&rules)?),
        }
    }
    let n_rules = compiled.len();
    let table = compile_rule_table(compiled)?;
    let fallback = load_model(model_path)?;
    docs::write_json(
        out,
        &EnsembleDoc {
            schema: docs::ENSEMBLE_SCHEMA,
            model: EnsembleModel { table, fallback },
        },
    )?;
    println!("{n_rules} rules compiled -> {}", out.display());
    Ok(())
}

fn ensemble_eval(
    args: DataArgs,
    seed: u64,
    folds: usize,
    cfg: MiningConfig,
    out: Option<&Path>,
) -> Result<()> {
    let table = args.load()?;
    let plan = FoldPlan::stratified(&table.labels, folds, seed)?;
    let report = evaluate_ensemble(&table, &plan, &cfg)?;
    println!(
        "ensemble accuracy {:.4} (fallback forest {:.4})",
        report.accuracy, report.forest_accuracy
    );
    println!(
        "rule firings {} / fallback firings {} (rules per fold: {:?})",
        report.rules_fired, report.fallback_fired, report.fold_rule_counts
    );
    if let Some(path) = out {
        docs::write_json(
            path,
            &serde_json::json!({ "schema": docs::REPORT_SCHEMA, "report": report }),
        )?;
        println!("report -> {}", path.display());
    }
    Ok(())
}

fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::default();
    let mut lines = text.lines();
    lines.next().context("empty confusion CSV")?;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let name = parts.next().context("missing class name")?;
        let truth = parse_fault(name)?;
        if truth.index() != i {
            bail!("confusion rows out of order: {name} at row {i}");
        }
        for (j, cell) in parts.enumerate() {
            if j >= N_CLASSES {
                bail!("too many columns in confusion CSV");
            }
            cm.counts[i][j] = cell
                .trim()
                .parse()
                .with_context(|| format!("bad count {cell:?} in confusion CSV"))?;
        }
    }
    Ok(cm)
}

fn render_cmd(input: &Path, kind: &str, out: &Path) -> Result<()> {
    let is_csv = input.extension().is_some_and(|e| e == "csv");
    let kind = if kind == "auto" {
        if is_csv {
            "confusion"
        } else {
            let value: serde_json::Value = docs::read_json(input)?;
            if value.get("profile").is_some() {
                let p: ProfileDoc = serde_json::from_value(value)?;
                match p.profile.kind {
                    steelfault::explain::ProfileKind::Cp => "cp",
                    steelfault::explain::ProfileKind::Pd => "pd",
                }
            } else if value.get("breakdown").is_some() {
                "bd"
            } else if value.get("radar").is_some() {
                "radar"
            } else if value.get("confusion").is_some() {
                "confusion"
            } else {
                bail!("{}: cannot infer chart kind; pass --kind", input.display());
            }
        }
    } else {
        kind
    };
    let svg_text = match kind {
        "cp" | "pd" => {
            let doc: ProfileDoc = docs::read_json(input)?;
            let name = steelfault::FEATURE_NAMES[doc.profile.feature];
            let title = match doc.profile.kind {
                steelfault::explain::ProfileKind::Cp => format!("Ceteris Paribus: {name}"),
                steelfault::explain::ProfileKind::Pd => format!("Partial Dependence: {name}"),
            };
            svg::profile_svg(&doc.profile, &title)
        }
        "bd" => {
            let doc: BreakdownDoc = docs::read_json(input)?;
            svg::breakdown_svg(&doc.breakdown)
        }
        "radar" => {
            let doc: RadarDoc = docs::read_json(input)?;
            let mut entries = Vec::new();
            for (name, row) in &doc.radar {
                let label = parse_fault(name)?;
                let mut values = [0.0; steelfault::N_FEATURES];
                let map = row.as_object().context("radar rows must be objects")?;
                for (feature, value) in map {
                    let f = parse_feature(feature)?;
                    values[f] = value.as_f64().context("radar values must be numbers")?;
                }
                entries.push((label, values));
            }
            entries.sort_by_key(|(l, _)| l.index());
            svg::radar_svg(&entries)
        }
        "confusion" => {
            let cm = if is_csv {
                let text = std::fs::read_to_string(input)
                    .with_context(|| format!("cannot read {}", input.display()))?;
                parse_confusion_csv(&text)?
            } else {
                let doc: docs::ConfusionDoc = docs::read_json(input)?;
                doc.confusion
            };
            svg::confusion_svg(&cm, "Confusion matrix")
        }
        other => bail!("unknown chart kind {other:?}"),
    };
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).ok();
    }
    std::fs::write(out, svg_text).with_context(|| format!("cannot write {}", out.display()))?;
    println!("{kind} chart -> {}", out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_csv_round_trips() {
        let mut cm = ConfusionMatrix::default();
        cm.record(FaultLabel::Bumps, FaultLabel::Bumps);
        cm.record(FaultLabel::Pastry, FaultLabel::Stains);
        let back = parse_confusion_csv(&cm.to_csv()).unwrap();
        assert_eq!(back, cm);
    }

    #[test]
    fn cli_parses_the_documented_invocations() {
        for argv in [
            vec!["steelfault", "ingest", "--data", "d.tsv"],
            vec![
                "steelfault", "balance", "--data", "d.tsv", "--strategy", "smote", "--k", "5",
                "--seed", "7", "--out", "b.csv",
            ],
            vec!["steelfault", "benchmark", "--data", "d.tsv", "--seed", "1", "--out", "g.csv"],
            vec![
                "steelfault", "train", "--data", "d.tsv", "--n-trees", "186", "--mtry", "5",
                "--seed", "4", "--out", "model.json",
            ],
            vec!["steelfault", "medoids", "--data", "d.tsv", "--out", "m.json"],
            vec![
                "steelfault", "explain", "cp", "--model", "m.json", "--data", "d.tsv",
                "--feature", "Length_of_Conveyer", "--medoid", "Pastry", "--out", "cp.json",
            ],
            vec![
                "steelfault", "mine", "--source", "rf", "--model", "model.json", "--data",
                "d.tsv", "--k", "20", "--out", "rules.json",
            ],
            vec![
                "steelfault", "mine", "--source", "arm", "--data", "d.tsv", "--bins", "20",
                "--min-support", "0.01", "--min-conf", "0.85", "--out", "arm.json",
            ],
            vec![
                "steelfault", "ensemble", "build", "--rules", "rules.json", "arm.json",
                "manual.json", "--model", "model.json", "--out", "ens.json",
            ],
            vec!["steelfault", "ensemble", "eval", "--data", "d.tsv", "--seed", "3"],
            vec!["steelfault", "render", "--input", "cp.json", "--out", "cp.svg"],
            vec!["steelfault", "pipeline", "--seed", "2", "--out-dir", "artifacts"],
        ] {
            Cli::try_parse_from(&argv).unwrap_or_else(|e| panic!("{argv:?}: {e}"));
        }
    }

    #[test]
    fn version_lists_every_schema() {
        for token in ["model", "profile", "manifest", "rules-rf", "rules-arm", "ensemble"] {
            assert!(docs::LONG_VERSION.contains(token), "missing {token}");
        }
    }
}
