//! Synthetic data: activity signals, a demo match with device files and
//! episodes, and transaction corpora with planted rules.

use std::f64::consts::PI;
use std::path::Path;

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detect::CorpusParams;
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, SignalWindow};
use crate::mining::Entry;
use crate::pipeline::DeviceData;
use crate::sensor::{Channel, DeviceConfig, PeriodClock, SensorKind, TimeFormat};
use crate::store::{Episode, MatchMeta, RosterEntry};

/// Samples of every canonical signal of `devices` devices for a window of
/// activity `class` performed by `subject`, starting at `t0`.
pub fn activity_columns(
    rng: &mut impl Rng,
    class: usize,
    subject: usize,
    devices: usize,
    width: usize,
    fs: f64,
    t0: f64,
) -> Vec<Vec<f64>> {
    let freq = 0.6 + 0.45 * class as f64 + 0.03 * subject as f64;
    let amp = (1.0 + 0.5 * (class % 4) as f64) * (1.0 + 0.04 * subject as f64);
    let mut columns = Vec::with_capacity(devices * Channel::COUNT);
    for d in 0..devices {
        let phase = 0.7 * d as f64 + 0.2 * class as f64;
        for channel in Channel::all() {
            let axis = channel.axis as usize as f64;
            let column = (0..width)
                .map(|i| {
                    let t = t0 + i as f64 / fs;
                    let wave = (2.0 * PI * freq * t + phase + axis).sin();
                    let noise = rng.random_range(-0.15..0.15);
                    match channel.sensor {
                        SensorKind::Acc => amp * wave + if axis == 2.0 { 9.81 } else { 0.0 } + noise,
                        SensorKind::Gyro => 40.0 * amp * (2.0 * PI * freq * t + phase).cos() * (axis + 1.0) / 3.0 + noise,
                        SensorKind::Mag => 0.4 + 0.1 * axis + 0.02 * class as f64 + 0.05 * wave + 0.01 * noise,
                    }
                })
                .collect();
            columns.push(column);
        }
    }
    columns
}

/// Writes a corpus in the layout read by [`crate::eval::dataset`]:
/// `aNN/pN/sNN.txt`, 125 rows × 45 values per segment.
pub fn write_activity_corpus(root: &Path, activities: usize, subjects: usize, segments: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for a in 1..=activities {
        for p in 1..=subjects {
            let dir = root.join(format!("a{a:02}")).join(format!("p{p}"));
            std::fs::create_dir_all(&dir)?;
            for s in 1..=segments {
                let cols = activity_columns(&mut rng, a - 1, p - 1, 5, 125, 25.0, (s - 1) as f64 * 5.0);
                let mut text = String::with_capacity(125 * 45 * 10);
                for i in 0..125 {
                    let row: Vec<String> = cols.iter().map(|c| format!("{:.6}", c[i])).collect();
                    text.push_str(&row.join(","));
                    text.push('\n');
                }
                std::fs::write(dir.join(format!("s{s:02}.txt")), text)?;
            }
        }
    }
    Ok(())
}

/// Labeled single-device feature vectors for `classes`, `per_subject`
/// windows for each of `subjects` subjects.
pub fn activity_training_set(classes: &[&str], subjects: usize, per_subject: usize, seed: u64) -> Result<Vec<FeatureVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (c, class) in classes.iter().enumerate() {
        for s in 0..subjects {
            for k in 0..per_subject {
                let t0 = k as f64 * 5.0;
                let cols = activity_columns(&mut rng, c, s, 1, 125, 25.0, t0);
                let window = SignalWindow::from_columns(format!("s{s}"), 1, t0, 5.0, cols)?;
                let mut fv = extract_features(&window, 25.0)?;
                fv.subject = format!("s{s}");
                fv.label = Some(class.to_string());
                out.push(fv);
            }
        }
    }
    Ok(out)
}

/// A window of arbitrary smooth-plus-noise signals, for arity checks.
pub fn random_window(rng: &mut impl Rng, devices: usize, width: usize) -> Result<SignalWindow> {
    let samples = (0..devices * Channel::COUNT)
        .map(|_| {
            let f = rng.random_range(0.1..5.0);
            let a = rng.random_range(0.1..20.0);
            let offset = rng.random_range(-10.0..10.0);
            (0..width).map(|i| offset + a * (f * i as f64 * 0.04).sin() + rng.random_range(-1.0..1.0)).collect()
        })
        .collect();
    SignalWindow::from_columns("random", 1, 0.0, width as f64 / 25.0, samples)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedRule {
    pub antecedent: String,
    pub consequent: String,
    pub confidence: f64,
}

#[derive(Clone, Debug)]
pub struct PlantedCorpus {
    pub entries: Vec<Entry>,
    pub planted: Vec<PlantedRule>,
}

/// Entries built from planted rules `A{i} → C{i}` plus independent noise
/// items `N{j}`. Entry `k` covers `[3k, 3k + 1)` for one scope key, so no
/// two entries overlap or touch.
pub fn planted_corpus(params: &CorpusParams) -> Result<PlantedCorpus> {
    if params.entries == 0 || params.planted_rules == 0 {
        return Err(Error::argument("corpus needs entries and planted rules"));
    }
    if !(0.0..=1.0).contains(&params.min_rule_confidence)
        || !(0.0..=1.0).contains(&params.antecedent_rate)
        || !(0.0..=1.0).contains(&params.noise_rate)
    {
        return Err(Error::argument("corpus rates must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let planted: Vec<PlantedRule> = (0..params.planted_rules)
        .map(|i| PlantedRule {
            antecedent: format!("A{i}"),
            consequent: format!("C{i}"),
            confidence: if params.min_rule_confidence >= 1.0 {
                1.0
            } else {
                rng.random_range(params.min_rule_confidence..=1.0)
            },
        })
        .collect();
    let entries = (0..params.entries)
        .map(|k| {
            let mut items = Vec::new();
            for rule in &planted {
                if rng.random_bool(params.antecedent_rate) {
                    items.push(rule.antecedent.clone());
                    if rng.random_bool(rule.confidence) {
                        items.push(rule.consequent.clone());
                    }
                }
            }
            for j in 0..params.noise_items {
                if rng.random_bool(params.noise_rate) {
                    items.push(format!("N{j}"));
                }
            }
            if items.is_empty() {
                items.push("Idle".into());
            }
            Entry {
                match_id: "synthetic".into(),
                player: Some("p".into()),
                scope_key: "p".into(),
                start_s: 3.0 * k as f64,
                end_s: 3.0 * k as f64 + 1.0,
                ..Entry::from_items(items)
            }
        })
        .collect();
    Ok(PlantedCorpus { entries, planted })
}

pub const DEMO_CLASSES: [&str; 4] = ["Jumping", "Kicking", "Running", "Standing still"];
pub const DEMO_SAMPLE_RATE: f64 = 25.0;
const SEGMENT_S: f64 = 5.0;
const PERIOD_S: f64 = 120.0;
const BREAK_S: f64 = 60.0;
const PRE_ROLL_S: f64 = 60.0;

#[derive(Clone, Debug)]
pub struct DemoMatch {
    pub meta: MatchMeta,
    pub episodes: Vec<Episode>,
    pub devices: Vec<DeviceData>,
    /// True activity per (player, period, segment start).
    pub timeline: Vec<(String, u32, f64, &'static str)>,
}

/// Column names of the demo device files, in XSens style. `Quat_W` is not
/// mapped and is discarded on ingest.
pub fn demo_column_map() -> std::collections::BTreeMap<String, Channel> {
    let names = ["Acc_X", "Acc_Y", "Acc_Z", "Gyr_X", "Gyr_Y", "Gyr_Z", "Mag_X", "Mag_Y", "Mag_Z"];
    names.iter().zip(Channel::all()).map(|(n, c)| (n.to_string(), c)).collect()
}

/// Two players, two 120 s periods, one 25 Hz device each. Episodes follow
/// the activity: passes and shots during kicking, headers during jumps,
/// receptions while standing. A few passes are deliberately annotated over
/// running segments.
pub fn demo_match(seed: u64) -> DemoMatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kickoff = Utc.with_ymd_and_hms(2024, 3, 2, 15, 0, 0).unwrap();
    let second = kickoff + chrono::Duration::seconds((PERIOD_S + BREAK_S) as i64);
    let power_on = kickoff - chrono::Duration::seconds(PRE_ROLL_S as i64);
    let meta = MatchMeta {
        match_id: "demo".into(),
        name: "Demo Home v Demo Away".into(),
        teams: vec!["Home".into(), "Away".into()],
        periods: vec![
            PeriodClock { period_id: 1, kickoff_wall_time: kickoff, duration_s: PERIOD_S },
            PeriodClock { period_id: 2, kickoff_wall_time: second, duration_s: PERIOD_S },
        ],
        players: vec![
            RosterEntry { player_id: "p1".into(), name: "One".into(), team: "Home".into(), shirt_number: 10 },
            RosterEntry { player_id: "p2".into(), name: "Two".into(), team: "Away".into(), shirt_number: 4 },
        ],
    };

    let mut timeline = Vec::new();
    let mut episodes = Vec::new();
    let mut devices = Vec::new();
    for (pi, roster) in meta.players.iter().enumerate() {
        let player = roster.player_id.clone();
        // Device-relative segments covering power-on to the end of period 2.
        let total_s = PRE_ROLL_S + PERIOD_S + BREAK_S + PERIOD_S;
        let segments = (total_s / SEGMENT_S) as usize;
        let mut classes = Vec::with_capacity(segments);
        for k in 0..segments {
            let rel = k as f64 * SEGMENT_S;
            let period = if rel < PRE_ROLL_S + PERIOD_S {
                Some((1u32, rel - PRE_ROLL_S))
            } else if rel >= PRE_ROLL_S + PERIOD_S + BREAK_S {
                Some((2u32, rel - PRE_ROLL_S - PERIOD_S - BREAK_S))
            } else {
                None
            };
            let class = match period {
                Some((_, t)) if t >= 0.0 => [0, 1, 1, 2, 2, 2, 3, 3][rng.random_range(0..8)],
                _ => 3,
            };
            classes.push(class);
            if let Some((period_id, t)) = period {
                timeline.push((player.clone(), period_id, t, DEMO_CLASSES[class]));
                if t < 0.0 {
                    continue;
                }
                let description = match class {
                    1 if rng.random_bool(0.8) => Some("Pass"),
                    1 => Some("Shot"),
                    0 => Some("Header"),
                    3 if rng.random_bool(0.3) => Some("Reception"),
                    2 if rng.random_bool(0.05) => Some("Pass"),
                    _ => None,
                };
                if let Some(description) = description {
                    let start = t + rng.random_range(0..3) as f64;
                    episodes.push(Episode {
                        episode_id: 0,
                        match_id: meta.match_id.clone(),
                        team: roster.team.clone(),
                        start_s: start,
                        end_s: start + 1.0,
                        half: period_id,
                        description: description.into(),
                        tags: vec![roster.team.to_lowercase(), "demo".into()],
                        player: Some(player.clone()),
                        notes: String::new(),
                    });
                }
            }
        }

        let per_segment = (SEGMENT_S * DEMO_SAMPLE_RATE) as usize;
        let mut text = String::from("SampleTimeFine;Acc_X;Acc_Y;Acc_Z;Gyr_X;Gyr_Y;Gyr_Z;Mag_X;Mag_Y;Mag_Z;Quat_W\n");
        for (k, &class) in classes.iter().enumerate() {
            let t0 = k as f64 * SEGMENT_S;
            let cols = activity_columns(&mut rng, class, pi, 1, per_segment, DEMO_SAMPLE_RATE, t0);
            for i in 0..per_segment {
                let counter = k * per_segment + i;
                text.push_str(&counter.to_string());
                for c in &cols {
                    text.push_str(&format!(";{:.5}", c[i]));
                }
                text.push_str(";1.0\n");
            }
        }
        devices.push(DeviceData {
            player: player.clone(),
            device_index: 0,
            config: DeviceConfig {
                device_slot: "pelvis".into(),
                column_map: demo_column_map(),
                time_column: "SampleTimeFine".into(),
                time_format: TimeFormat::SampleCounter,
                sample_rate_hz: DEMO_SAMPLE_RATE,
                power_on_wall_time: power_on,
            },
            bytes: text.into_bytes(),
        });
    }
    episodes.sort_by(|a, b| {
        a.half.cmp(&b.half).then(a.start_s.total_cmp(&b.start_s)).then(a.player.cmp(&b.player))
    });
    for (i, e) in episodes.iter_mut().enumerate() {
        e.episode_id = i as i64 + 1;
    }
    DemoMatch { meta, episodes, devices, timeline }
}
