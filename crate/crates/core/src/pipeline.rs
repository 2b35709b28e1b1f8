//! Stage drivers shared by the command line and the HTTP service.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{detect, export_warnings, Thresholds, Warning, WarningState};
use crate::error::{Error, Result};
use crate::features::{chi2_scores, extract_features, make_windows, select_top_k, FeatureVector, WindowParams};
use crate::forest::{self, ActivityPrediction, Classifier, ForestModel, ForestParams};
use crate::mining::{build_entries, mine, write_rules, AssociationRule, LevelMapping, MiningParams};
use crate::sensor::{parse_sensor_file, synchronize, DeviceConfig, DeviceRef, DropCounts, PeriodClock, SensorReading, SyncOptions};
use crate::store::{ActivityLabelRow, Store};
use crate::synth;

/// Default number of features kept by the chi-squared ranking.
pub const DEFAULT_TOP_K: usize = 30;

/// Sliding-window settings for activity recognition.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarWindow {
    pub duration_s: f64,
    pub overlap_fraction: f64,
}

impl Default for HarWindow {
    fn default() -> Self {
        HarWindow { duration_s: 5.0, overlap_fraction: 0.0 }
    }
}

impl HarWindow {
    pub fn params(&self, sample_rate_hz: f64) -> WindowParams {
        WindowParams { duration_s: self.duration_s, overlap_fraction: self.overlap_fraction, sample_rate_hz }
    }
}

/// One device file of one player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceInput {
    pub player: String,
    #[serde(default)]
    pub device_index: u16,
    pub path: PathBuf,
    #[serde(flatten)]
    pub config: DeviceConfig,
}

/// A device file already in memory.
#[derive(Clone, Debug)]
pub struct DeviceData {
    pub player: String,
    pub device_index: u16,
    pub config: DeviceConfig,
    pub bytes: Vec<u8>,
}

/// Everything the subcommands read: input and output paths plus the
/// parameters of every stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Store root; `FOOTLAB_DATA_DIR` takes precedence.
    pub data_dir: Option<PathBuf>,
    /// Match metadata document (JSON).
    pub match_file: Option<PathBuf>,
    pub episode_files: Vec<PathBuf>,
    pub devices: Vec<DeviceInput>,
    /// Labeled corpus in the `aNN/pN/sNN.txt` layout.
    pub training_dir: Option<PathBuf>,
    /// Labeled feature table (CSV), used when `training_dir` is unset.
    pub features_file: Option<PathBuf>,
    pub model_file: PathBuf,
    pub rules_file: PathBuf,
    pub manual_rules_file: Option<PathBuf>,
    pub window: HarWindow,
    pub top_k: usize,
    pub forest: ForestParams,
    pub mining: MiningParams,
    pub levels: LevelMapping,
    pub thresholds: Thresholds,
    pub seed: u64,
    pub listen: String,
    /// Static files served under `/ui/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: None,
            match_file: None,
            episode_files: Vec::new(),
            devices: Vec::new(),
            training_dir: None,
            features_file: None,
            model_file: PathBuf::from("model.flf"),
            rules_file: PathBuf::from("rules.txt"),
            manual_rules_file: None,
            window: HarWindow::default(),
            top_k: DEFAULT_TOP_K,
            forest: ForestParams::default(),
            mining: MiningParams::default(),
            levels: LevelMapping::default(),
            thresholds: Thresholds::default(),
            seed: 0,
            listen: "127.0.0.1:8080".into(),
            ui_dir: None,
        }
    }
}

impl PipelineConfig {
    /// `key: reason` for every parameter outside its range. Paths are
    /// checked by the subcommands that read them.
    pub fn problems(&self) -> Vec<String> {
        let mut keys = Vec::new();
        if !(self.window.duration_s > 0.0 && self.window.duration_s.is_finite()) {
            keys.push("window.duration_s".to_string());
        }
        if !(0.0..1.0).contains(&self.window.overlap_fraction) {
            keys.push("window.overlap_fraction".to_string());
        }
        if self.top_k == 0 {
            keys.push("top_k".to_string());
        }
        if let Err(Error::Validation(bad)) = self.forest.validate() {
            keys.extend(bad.into_iter().map(|k| format!("forest.{k}")));
        }
        keys.extend(self.mining.invalid_fields("mining"));
        keys.extend(self.levels.invalid_fields("levels"));
        keys.extend(self.thresholds.invalid_fields());
        if self.listen.parse::<std::net::SocketAddr>().is_err() {
            keys.push("listen".to_string());
        }
        let mut problems: Vec<String> = keys.into_iter().map(|k| format!("{k}: out of range")).collect();
        for (i, d) in self.devices.iter().enumerate() {
            if d.player.is_empty() {
                problems.push(format!("devices[{i}].player: empty"));
            }
            if let Err(e) = d.config.validate() {
                problems.push(format!("devices[{i}]: {}", strip_kind(&e)));
            }
        }
        problems
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Forest parameters with the pipeline seed applied.
    pub fn forest_params(&self) -> ForestParams {
        ForestParams { seed: self.seed, ..self.forest.clone() }
    }

    /// Store root: `FOOTLAB_DATA_DIR`, then `data_dir`, then `footlab-data`.
    pub fn store_dir(&self) -> PathBuf {
        std::env::var_os("FOOTLAB_DATA_DIR")
            .map(PathBuf::from)
            .or_else(|| self.data_dir.clone())
            .unwrap_or_else(|| PathBuf::from("footlab-data"))
    }
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::Format(m) | Error::Argument(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Fails with `key: path not found` unless `path` exists.
pub fn require_path(key: &str, path: Option<&Path>) -> Result<PathBuf> {
    match path {
        Some(p) if p.exists() => Ok(p.to_path_buf()),
        _ => Err(Error::Validation(vec![format!("{key}: path not found")])),
    }
}

impl DeviceInput {
    pub fn load(&self) -> Result<DeviceData> {
        Ok(DeviceData {
            player: self.player.clone(),
            device_index: self.device_index,
            config: self.config.clone(),
            bytes: std::fs::read(&self.path)?,
        })
    }
}

/// Parses and aligns every device file. Files are processed in parallel;
/// the output is ordered as the input.
pub fn synchronize_devices(devices: &[DeviceData], clocks: &[PeriodClock], options: SyncOptions) -> Result<(Vec<SensorReading>, DropCounts)> {
    let parts: Vec<_> = devices
        .par_iter()
        .map(|d| {
            let raw = parse_sensor_file(&d.bytes, &d.config)?;
            let device = DeviceRef { player_id: Arc::from(d.player.as_str()), device_index: d.device_index };
            synchronize(&raw, &d.config, &device, clocks, options)
        })
        .collect::<Result<_>>()?;
    let mut readings = Vec::new();
    let mut dropped = DropCounts::default();
    for part in parts {
        readings.extend(part.readings);
        dropped.before_pre_roll += part.dropped.before_pre_roll;
        dropped.between_periods += part.dropped.between_periods;
        dropped.after_last_period += part.dropped.after_last_period;
    }
    Ok((readings, dropped))
}

/// Windows the readings and extracts one feature vector per window.
pub fn har_features(readings: &[SensorReading], params: WindowParams) -> Result<Vec<FeatureVector>> {
    let windows = make_windows(readings, params)?;
    windows.par_iter().map(|w| extract_features(w, params.sample_rate_hz)).collect()
}

/// Ranks features on the labeled vectors, keeps the top `k` and fits a
/// forest on them.
pub fn har_train(vectors: &[FeatureVector], k: usize, params: &ForestParams) -> Result<ForestModel> {
    let labeled: Vec<&FeatureVector> = vectors.iter().collect();
    if labeled.is_empty() {
        return Err(Error::argument("no training vectors"));
    }
    let scores = chi2_scores(&labeled)?;
    let selection = select_top_k(&scores, k.min(scores.len()))?;
    forest::train(&labeled, &selection, params)
}

pub fn har_predict(model: &ForestModel, vectors: &[FeatureVector]) -> Result<Vec<ActivityPrediction>> {
    vectors.par_iter().map(|v| model.predict(v)).collect()
}

/// Device files of one match through recognition into the store's
/// activity rows. All devices must share one sample rate.
pub fn ingest_match(
    store: &Store,
    match_id: &str,
    devices: &[DeviceData],
    model: &ForestModel,
    window: HarWindow,
) -> Result<Vec<ActivityLabelRow>> {
    let meta = store.get_match(match_id)?;
    let rate = devices.first().map(|d| d.config.sample_rate_hz).ok_or_else(|| Error::argument("no device files"))?;
    if devices.iter().any(|d| d.config.sample_rate_hz != rate) {
        return Err(Error::argument("device files differ in sample rate"));
    }
    let (readings, _) = synchronize_devices(devices, &meta.periods, SyncOptions::default())?;
    let vectors = har_features(&readings, window.params(rate))?;
    let predictions = har_predict(model, &vectors)?;
    store.aggregate_labels(match_id, &predictions)
}

/// Mines every match in the store, appends manual rules that do not
/// duplicate a mined one, and stores the result.
pub fn mine_store(store: &Store, params: &MiningParams, manual: &[AssociationRule]) -> Result<Vec<AssociationRule>> {
    let mut rows = Vec::new();
    for m in store.list_matches()? {
        rows.extend(store.timed_items(&m.match_id)?);
    }
    let mut rules = mine(&rows, params)?;
    for r in manual {
        if !rules.iter().any(|m| m.same_shape(r)) {
            rules.push(r.clone());
        }
    }
    store.replace_rules(&rules)?;
    Ok(rules)
}

/// Runs the detector on one match and replaces its open warnings. Returns
/// every warning of the match after the run.
pub fn detect_match(
    store: &Store,
    match_id: &str,
    rules: &[AssociationRule],
    thresholds: &Thresholds,
    params: &MiningParams,
) -> Result<Vec<Warning>> {
    thresholds.validate()?;
    let rows = store.timed_items(match_id)?;
    let entries = build_entries(&rows, &params.entry_params())?;
    let found = detect(&entries, rules, thresholds);
    store.replace_open_warnings(match_id, &found)?;
    store.warnings(match_id, None)
}

/// Files written by [`run_demo`].
#[derive(Clone, Debug)]
pub struct DemoArtifacts {
    pub model: PathBuf,
    pub rules: PathBuf,
    pub warnings: PathBuf,
    pub open_warnings: usize,
}

/// The whole pipeline on the synthetic demo match: train, ingest, mine,
/// detect. Artifacts and the store go under `dir`.
pub fn run_demo(dir: &Path, seed: u64) -> Result<DemoArtifacts> {
    std::fs::create_dir_all(dir)?;
    let training = synth::activity_training_set(&synth::DEMO_CLASSES, 3, 12, seed)?;
    let model = har_train(&training, DEFAULT_TOP_K, &ForestParams { seed, ..Default::default() })?;
    let model_path = dir.join("model.flf");
    std::fs::write(&model_path, forest::serialize(&model))?;

    let demo = synth::demo_match(seed);
    let store = Store::open(&dir.join("store"))?;
    store.upsert_match(&demo.meta)?;
    store.upsert_episodes(&demo.meta.match_id, &demo.episodes)?;
    ingest_match(&store, &demo.meta.match_id, &demo.devices, &model, HarWindow::default())?;

    let params = MiningParams::default();
    let rules = mine_store(&store, &params, &[])?;
    let rules_path = dir.join("rules.txt");
    std::fs::write(&rules_path, write_rules(&rules, Some(&params))?)?;

    let warnings = detect_match(&store, &demo.meta.match_id, &rules, &Thresholds::default(), &params)?;
    let warnings_path = dir.join("warnings.json");
    std::fs::write(&warnings_path, export_warnings(&warnings)?)?;
    Ok(DemoArtifacts {
        model: model_path,
        rules: rules_path,
        warnings: warnings_path,
        open_warnings: warnings.iter().filter(|w| w.state == WarningState::Open).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_flags_planted_passes() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_demo(dir.path(), 11).unwrap();
        let text = std::fs::read_to_string(&out.rules).unwrap();
        assert!(text.starts_with("# window_s=10"), "{text}");
        assert!(text.contains("Pass|Kicking|"), "{text}");
        assert!(out.open_warnings > 0);
        let warnings = crate::detect::read_warnings(&std::fs::read(&out.warnings).unwrap()).unwrap();
        assert!(warnings.iter().any(|w| w.missing_items == ["Kicking"]));
    }

    #[test]
    fn config_problems_listed_together() {
        let mut config = PipelineConfig::default();
        config.top_k = 0;
        config.thresholds.min_confidence = Some(2.0);
        config.mining.step_s = -1.0;
        let problems = config.problems();
        assert_eq!(
            problems,
            ["top_k: out of range", "mining.step_s: out of range", "thresholds.min_confidence: out of range"]
        );
        assert!(PipelineConfig::default().problems().is_empty());
    }

    #[test]
    fn missing_path() {
        let err = require_path("rules", Some(Path::new("/no/such/rules.txt"))).unwrap_err();
        assert!(matches!(err, Error::Validation(ref v) if v == &["rules: path not found"]));
    }
}
