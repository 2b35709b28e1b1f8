use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use footlab_core::detect::export_warnings;
use footlab_core::eval::{dataset, loso_evaluate, render_report, ReportFormat};
use footlab_core::features::table;
use footlab_core::forest;
use footlab_core::mining::{load_manual_rules, read_rules, write_rules};
use footlab_core::pipeline::{self, require_path, DeviceInput, PipelineConfig};
use footlab_core::store::parse_episode_file;
use footlab_core::{synth, AssociationRule, Error, FeatureVector, ForestModel, MatchMeta, Result, Store, Thresholds};

use crate::api::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "footlab", version, about = "Activity recognition and annotation error detection for football matches")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration (TOML). Relative paths inside it are resolved
    /// against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for written artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Store match metadata and episodes; write feature tables from device files.
    Ingest {
        #[arg(long)]
        match_file: Option<PathBuf>,
    },
    /// Train the activity classifier and write the model file.
    HarTrain {
        /// Labeled corpus directory (aNN/pN/sNN.txt).
        #[arg(long)]
        training_dir: Option<PathBuf>,
        /// Labeled feature table, used when no corpus directory is given.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Classify a feature table and aggregate the labels into the store.
    HarPredict {
        #[arg(long = "match")]
        match_id: Option<String>,
        /// Feature table; defaults to the one `ingest` wrote for the match.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Leave-one-subject-out evaluation of the classifier.
    Evaluate {
        #[arg(long)]
        training_dir: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Report layout: `csv` or `json`.
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Mine association rules from every stored match and write the rules file.
    Mine,
    /// Run the detector with the rules file and write the warnings export.
    Detect {
        #[arg(long = "match")]
        match_id: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Dump every store table under `<out>/export`.
    Export,
    /// Write a synthetic demo match, training table and configuration.
    Synth,
}

/// Configuration with paths resolved.
pub struct Context {
    pub config: PipelineConfig,
    pub out: PathBuf,
}

impl Context {
    /// Output location of a declared artifact.
    fn artifact(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out.join(path)
        }
    }

    fn store(&self) -> Result<Store> {
        Store::open(&self.config.store_dir())
    }

    fn model(&self) -> Result<ForestModel> {
        let path = require_path("model", Some(&self.artifact(&self.config.model_file)))?;
        forest::deserialize(&std::fs::read(path)?)
    }

    fn manual_rules(&self) -> Result<Vec<AssociationRule>> {
        match &self.config.manual_rules_file {
            None => Ok(Vec::new()),
            Some(p) => {
                let path = require_path("manual_rules", Some(p))?;
                load_manual_rules(&std::fs::read_to_string(path)?, &self.config.levels)
            }
        }
    }

    /// `--match`, else the configured match file, else the only stored match.
    fn match_id(&self, explicit: Option<String>, store: &Store) -> Result<String> {
        if let Some(id) = explicit {
            return Ok(id);
        }
        if let Some(path) = &self.config.match_file {
            return Ok(read_match(path)?.match_id);
        }
        let matches = store.list_matches()?;
        match matches.as_slice() {
            [only] => Ok(only.match_id.clone()),
            _ => Err(Error::Validation(vec!["match: required".into()])),
        }
    }

    fn features_path(&self, match_id: &str) -> PathBuf {
        self.out.join(format!("features-{match_id}.csv"))
    }
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

/// Reads, resolves and validates the configuration. Every failing key is
/// reported at once.
pub fn load_config(global: &GlobalArgs) -> Result<Context> {
    let mut config = match &global.config {
        None => PipelineConfig::default(),
        Some(path) => {
            let path = require_path("config", Some(path))?;
            let text = std::fs::read_to_string(&path)?;
            let mut config: PipelineConfig = toml::from_str(&text)
                .map_err(|e| Error::Validation(vec![format!("config: {}", one_line(e.message()))]))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            for p in [&mut config.data_dir, &mut config.match_file, &mut config.training_dir, &mut config.features_file]
                .into_iter()
                .flatten()
            {
                resolve(&base, p);
            }
            for p in config.episode_files.iter_mut() {
                resolve(&base, p);
            }
            for d in config.devices.iter_mut() {
                resolve(&base, &mut d.path);
            }
            for p in [&mut config.manual_rules_file, &mut config.ui_dir].into_iter().flatten() {
                resolve(&base, p);
            }
            config
        }
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(Context { config, out: global.out.clone() })
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The single-line form printed after `error: `.
pub fn error_line(e: &Error) -> String {
    match e {
        Error::Validation(items) => items
            .iter()
            .map(|p| if p.contains(": ") { p.clone() } else { format!("{p}: invalid") })
            .collect::<Vec<_>>()
            .join("; "),
        other => one_line(&other.to_string()),
    }
}

fn read_match(path: &Path) -> Result<MatchMeta> {
    let path = require_path("match_file", Some(path))?;
    let meta: MatchMeta = serde_json::from_slice(&std::fs::read(path)?)?;
    let bad = meta.invalid_fields();
    if !bad.is_empty() {
        return Err(Error::Validation(bad.into_iter().map(|f| format!("match_file.{f}: invalid")).collect()));
    }
    Ok(meta)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn training_vectors(ctx: &Context, dir: Option<PathBuf>, features: Option<PathBuf>) -> Result<Vec<FeatureVector>> {
    if let Some(dir) = dir.or_else(|| ctx.config.training_dir.clone()) {
        return dataset::load_feature_vectors(&require_path("training_dir", Some(&dir))?);
    }
    let path = require_path("features", features.or_else(|| ctx.config.features_file.clone()).as_deref())?;
    table::read_csv(&std::fs::read(path)?)
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = load_config(&cli.global)?;
    match cli.command {
        Command::Ingest { match_file } => ingest(&ctx, match_file),
        Command::HarTrain { training_dir, features } => {
            let vectors = training_vectors(&ctx, training_dir, features)?;
            let model = pipeline::har_train(&vectors, ctx.config.top_k, &ctx.config.forest_params())?;
            let path = ctx.artifact(&ctx.config.model_file);
            write(&path, forest::serialize(&model))?;
            println!("model: {} ({} classes, {} trees)", path.display(), model.classes.len(), model.trees.len());
            Ok(())
        }
        Command::HarPredict { match_id, features } => {
            let store = ctx.store()?;
            let model = ctx.model()?;
            let match_id = ctx.match_id(match_id, &store)?;
            let path = require_path("features", Some(&features.unwrap_or_else(|| ctx.features_path(&match_id))))?;
            let vectors = table::read_csv(&std::fs::read(path)?)?;
            let predictions = pipeline::har_predict(&model, &vectors)?;
            let rows = store.aggregate_labels(&match_id, &predictions)?;
            let out = ctx.out.join(format!("predictions-{match_id}.json"));
            let mut bytes = serde_json::to_vec_pretty(&predictions)?;
            bytes.push(b'\n');
            write(&out, bytes)?;
            println!("predictions: {} windows, {} activity rows", predictions.len(), rows.len());
            Ok(())
        }
        Command::Evaluate { training_dir, features, format } => {
            let format: ReportFormat = format.parse()?;
            let vectors = training_vectors(&ctx, training_dir, features)?;
            let report = loso_evaluate(&vectors, ctx.config.top_k, &ctx.config.forest_params())?;
            let name = if format == ReportFormat::Json { "report.json" } else { "report.csv" };
            write(&ctx.out.join(name), render_report(&report, format)?)?;
            let a = report.averages;
            println!("precision={:.3} recall={:.3} f_score={:.3}", a.precision, a.recall, a.f_score);
            Ok(())
        }
        Command::Mine => {
            let store = ctx.store()?;
            let manual = ctx.manual_rules()?;
            let rules = pipeline::mine_store(&store, &ctx.config.mining, &manual)?;
            let path = ctx.artifact(&ctx.config.rules_file);
            write(&path, write_rules(&rules, Some(&ctx.config.mining))?)?;
            println!("rules: {} ({} rules)", path.display(), rules.len());
            Ok(())
        }
        Command::Detect { match_id } => {
            let rules_path = require_path("rules", Some(&ctx.artifact(&ctx.config.rules_file)))?;
            let rules = read_rules(&std::fs::read_to_string(rules_path)?)?;
            let store = ctx.store()?;
            let ids = match match_id {
                Some(id) => vec![id],
                None => store.list_matches()?.into_iter().map(|m| m.match_id).collect(),
            };
            let mut warnings = Vec::new();
            for id in ids {
                warnings.extend(pipeline::detect_match(&store, &id, &rules, &ctx.config.thresholds, &ctx.config.mining)?);
            }
            write(&ctx.out.join("warnings.json"), export_warnings(&warnings)?)?;
            println!("warnings: {}", warnings.len());
            Ok(())
        }
        Command::Serve { listen } => {
            let addr = listen.unwrap_or_else(|| ctx.config.listen.clone());
            let addr = addr.parse().map_err(|_| Error::Validation(vec!["listen: invalid".into()]))?;
            let model = match ctx.model() {
                Ok(m) => Some(m),
                Err(Error::Validation(_)) => None,
                Err(e) => return Err(e),
            };
            let state = AppState::new(ctx.store()?, model, ctx.manual_rules()?, ctx.config);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(api::serve(state, addr))?;
            Ok(())
        }
        Command::Export => {
            let store = ctx.store()?;
            let files = store.export_tables(&ctx.out.join("export"))?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Synth => write_demo(&ctx.out, ctx.config.seed),
    }
}

fn ingest(ctx: &Context, match_file: Option<PathBuf>) -> Result<()> {
    let path = match_file.or_else(|| ctx.config.match_file.clone());
    let meta = read_match(path.as_deref().unwrap_or(Path::new("")))?;
    let mut problems = Vec::new();
    for (i, p) in ctx.config.episode_files.iter().enumerate() {
        if !p.exists() {
            problems.push(format!("episode_files[{i}]: path not found"));
        }
    }
    for (i, d) in ctx.config.devices.iter().enumerate() {
        if !d.path.exists() {
            problems.push(format!("devices[{i}].path: path not found"));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let store = ctx.store()?;
    store.upsert_match(&meta)?;
    let mut episodes = 0;
    for p in &ctx.config.episode_files {
        episodes += store.upsert_episodes(&meta.match_id, &parse_episode_file(&std::fs::read(p)?)?)?;
    }
    println!("match {}: {episodes} episodes", meta.match_id);

    if ctx.config.devices.is_empty() {
        return Ok(());
    }
    let devices = ctx.config.devices.iter().map(DeviceInput::load).collect::<Result<Vec<_>>>()?;
    let rate = devices[0].config.sample_rate_hz;
    if devices.iter().any(|d| d.config.sample_rate_hz != rate) {
        return Err(Error::Validation(vec!["devices: sample rates differ".into()]));
    }
    let (readings, dropped) = pipeline::synchronize_devices(&devices, &meta.periods, Default::default())?;
    let vectors = pipeline::har_features(&readings, ctx.config.window.params(rate))?;
    let path = ctx.features_path(&meta.match_id);
    write(&path, table::write_csv(&vectors)?)?;
    println!(
        "features: {} ({} windows; dropped {} readings outside periods)",
        path.display(),
        vectors.len(),
        dropped.total()
    );
    Ok(())
}

/// Demo inputs plus a configuration that runs every subcommand on them.
fn write_demo(out: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let demo = synth::demo_match(seed);
    write(&out.join("match.json"), serde_json::to_vec_pretty(&demo.meta)?)?;
    write(&out.join("episodes.csv"), footlab_core::store::write_episode_file(&demo.episodes)?)?;
    let mut devices = Vec::new();
    for d in &demo.devices {
        let name = format!("{}-{}.csv", d.player, d.config.device_slot);
        write(&out.join(&name), &d.bytes)?;
        devices.push(DeviceInput { player: d.player.clone(), device_index: d.device_index, path: name.into(), config: d.config.clone() });
    }
    let training = synth::activity_training_set(&synth::DEMO_CLASSES, 3, 12, seed)?;
    write(&out.join("training.csv"), table::write_csv(&training)?)?;
    let config = PipelineConfig {
        data_dir: Some("store".into()),
        match_file: Some("match.json".into()),
        episode_files: vec!["episodes.csv".into()],
        devices,
        features_file: Some("training.csv".into()),
        thresholds: Thresholds { min_confidence: Some(0.8), ..Default::default() },
        seed,
        ..Default::default()
    };
    let text = toml::to_string(&config).map_err(|e| Error::Validation(vec![format!("config: {e}")]))?;
    write(&out.join("footlab.toml"), text)?;
    println!("demo written to {}", out.display());
    Ok(())
}
