//! Embedded annotation store.
//!
//! One SQLite file, `footlab.db`, under the store directory. Every write is
//! a single transaction, and one connection guarded by a mutex serializes
//! access, so a reader sees a batch either entirely or not at all.
//!
//! **Time base.** Episode and activity times are seconds since the kickoff
//! of their period (`half` for episodes, `period_id` for activity rows; the
//! two are the same number). Nothing in the store is match-absolute.
//!
//! Tables: `meta`, `matches`, `periods`, `players`, `episodes`,
//! `activity_labels`, `rules`, `warnings`, `resolutions`.

mod episodes;
mod export;
mod labels;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension, Row, Transaction};
use serde::{Deserialize, Serialize};

use crate::detect::{warning_order, Warning, WarningState};
use crate::error::{Error, Result};
use crate::forest::ActivityPrediction;
use crate::mining::{AssociationRule, Level, RuleOrigin, TimedItem};
use crate::sensor::{validate_clocks, PeriodClock};

pub use episodes::{format_clock, parse_clock, parse_episode_file, write_episode_file, Episode, EPISODE_FIELDS};
pub use labels::{merge_predictions, ActivityLabelRow, LabelSource};

pub const DB_FILE: &str = "footlab.db";
const SCHEMA_VERSION: &str = "1";

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS matches (
    match_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    teams TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS periods (
    match_id TEXT NOT NULL,
    period_id INTEGER NOT NULL,
    kickoff_wall_time TEXT NOT NULL,
    duration_s REAL NOT NULL,
    PRIMARY KEY (match_id, period_id)
);
CREATE TABLE IF NOT EXISTS players (
    match_id TEXT NOT NULL,
    player_id TEXT NOT NULL,
    name TEXT NOT NULL,
    team TEXT NOT NULL,
    shirt_number INTEGER NOT NULL,
    position INTEGER NOT NULL,
    PRIMARY KEY (match_id, player_id)
);
CREATE TABLE IF NOT EXISTS episodes (
    match_id TEXT NOT NULL,
    episode_id INTEGER NOT NULL,
    team TEXT NOT NULL,
    start_s REAL NOT NULL,
    end_s REAL NOT NULL,
    half INTEGER NOT NULL,
    description TEXT NOT NULL,
    tags TEXT NOT NULL,
    player TEXT,
    notes TEXT NOT NULL,
    PRIMARY KEY (match_id, episode_id)
);
CREATE INDEX IF NOT EXISTS episodes_by_start ON episodes (match_id, half, start_s);
CREATE TABLE IF NOT EXISTS activity_labels (
    label_id INTEGER PRIMARY KEY AUTOINCREMENT,
    match_id TEXT NOT NULL,
    player TEXT NOT NULL,
    period_id INTEGER NOT NULL,
    start_s REAL NOT NULL,
    end_s REAL NOT NULL,
    activity_class TEXT NOT NULL,
    source TEXT NOT NULL,
    vote_fraction REAL
);
CREATE INDEX IF NOT EXISTS labels_by_start ON activity_labels (match_id, period_id, start_s);
CREATE TABLE IF NOT EXISTS rules (
    rule_id INTEGER PRIMARY KEY AUTOINCREMENT,
    antecedent TEXT NOT NULL,
    consequent TEXT NOT NULL,
    support REAL,
    confidence REAL NOT NULL,
    conviction REAL,
    origin TEXT NOT NULL,
    level TEXT
);
CREATE TABLE IF NOT EXISTS warnings (
    warning_id INTEGER PRIMARY KEY AUTOINCREMENT,
    match_id TEXT NOT NULL,
    player TEXT,
    scope_key TEXT NOT NULL,
    half INTEGER NOT NULL,
    start_s REAL NOT NULL,
    end_s REAL NOT NULL,
    rule TEXT NOT NULL,
    present_items TEXT NOT NULL,
    missing_items TEXT NOT NULL,
    severity REAL NOT NULL,
    state TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS resolutions (
    audit_id INTEGER PRIMARY KEY AUTOINCREMENT,
    warning_id INTEGER NOT NULL,
    action TEXT NOT NULL,
    episode_id INTEGER,
    previous_description TEXT,
    new_description TEXT,
    resolved_at TEXT NOT NULL
);
";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub player_id: String,
    #[serde(default)]
    pub name: String,
    pub team: String,
    pub shirt_number: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchMeta {
    pub match_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub teams: Vec<String>,
    #[serde(default)]
    pub periods: Vec<PeriodClock>,
    #[serde(default)]
    pub players: Vec<RosterEntry>,
}

impl MatchMeta {
    pub fn invalid_fields(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.match_id.trim().is_empty() {
            bad.push("match_id".to_string());
        }
        if !self.periods.is_empty() && validate_clocks(&self.periods).is_err() {
            bad.push("periods".to_string());
        }
        let mut seen = BTreeSet::new();
        for (i, p) in self.players.iter().enumerate() {
            if p.player_id.is_empty() || !seen.insert(p.player_id.as_str()) {
                bad.push(format!("players[{i}].player_id"));
            }
        }
        bad
    }

    pub fn team_of(&self, player: &str) -> Option<&str> {
        self.players.iter().find(|p| p.player_id == player).map(|p| p.team.as_str())
    }
}

/// One row of the ordered event query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventRow {
    Episode(Episode),
    Activity(ActivityLabelRow),
}

impl EventRow {
    pub fn start_s(&self) -> f64 {
        match self {
            EventRow::Episode(e) => e.start_s,
            EventRow::Activity(a) => a.start_s,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            EventRow::Episode(_) => 0,
            EventRow::Activity(_) => 1,
        }
    }

    fn id(&self) -> i64 {
        match self {
            EventRow::Episode(e) => e.episode_id,
            EventRow::Activity(a) => a.label_id.unwrap_or(i64::MAX),
        }
    }
}

/// Start ascending; episodes before activities at equal start; then id.
pub fn event_order(a: &EventRow, b: &EventRow) -> Ordering {
    a.start_s().total_cmp(&b.start_s()).then(a.kind_rank().cmp(&b.kind_rank())).then(a.id().cmp(&b.id()))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionAction {
    Fix,
    Dismiss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub action: ResolutionAction,
    #[serde(default)]
    pub corrected_description: Option<String>,
    /// Episode to correct; when absent, the earliest episode in the warning's
    /// scope and interval whose description is in the rule antecedent, or
    /// failing that the earliest one in scope and interval.
    #[serde(default)]
    pub episode_id: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub audit_id: i64,
    pub warning_id: i64,
    pub action: ResolutionAction,
    pub episode_id: Option<i64>,
    pub previous_description: Option<String>,
    pub new_description: Option<String>,
    pub resolved_at: String,
}

pub struct Store {
    conn: Mutex<Connection>,
    path: Option<PathBuf>,
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)?)
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> rusqlite::Result<T> {
    serde_json::from_str(s).map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn parse_text<T: std::str::FromStr<Err = Error>>(s: &str) -> rusqlite::Result<T> {
    s.parse().map_err(|e: Error| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn episode_from_row(r: &Row<'_>) -> rusqlite::Result<Episode> {
    let tags: String = r.get("tags")?;
    Ok(Episode {
        episode_id: r.get("episode_id")?,
        match_id: r.get("match_id")?,
        team: r.get("team")?,
        start_s: r.get("start_s")?,
        end_s: r.get("end_s")?,
        half: r.get("half")?,
        description: r.get("description")?,
        tags: if tags.is_empty() { Vec::new() } else { tags.split(';').map(str::to_string).collect() },
        player: r.get("player")?,
        notes: r.get("notes")?,
    })
}

fn label_from_row(r: &Row<'_>) -> rusqlite::Result<ActivityLabelRow> {
    Ok(ActivityLabelRow {
        label_id: Some(r.get("label_id")?),
        match_id: r.get("match_id")?,
        player: r.get("player")?,
        period_id: r.get("period_id")?,
        start_s: r.get("start_s")?,
        end_s: r.get("end_s")?,
        activity_class: r.get("activity_class")?,
        source: parse_text(&r.get::<_, String>("source")?)?,
        vote_fraction: r.get("vote_fraction")?,
    })
}

fn warning_from_row(r: &Row<'_>) -> rusqlite::Result<Warning> {
    Ok(Warning {
        warning_id: r.get("warning_id")?,
        match_id: r.get("match_id")?,
        player: r.get("player")?,
        scope_key: r.get("scope_key")?,
        half: r.get("half")?,
        start_s: r.get("start_s")?,
        end_s: r.get("end_s")?,
        rule: from_json(&r.get::<_, String>("rule")?)?,
        present_items: from_json(&r.get::<_, String>("present_items")?)?,
        missing_items: from_json(&r.get::<_, String>("missing_items")?)?,
        severity: r.get("severity")?,
        state: parse_text(&r.get::<_, String>("state")?)?,
    })
}

fn rule_from_row(r: &Row<'_>) -> rusqlite::Result<AssociationRule> {
    let split = |s: String| s.split(';').map(str::to_string).collect::<Vec<_>>();
    let level: Option<String> = r.get("level")?;
    Ok(AssociationRule {
        antecedent: split(r.get("antecedent")?),
        consequent: split(r.get("consequent")?),
        support: r.get("support")?,
        confidence: r.get("confidence")?,
        conviction: r.get("conviction")?,
        origin: match r.get::<_, String>("origin")?.as_str() {
            "manual" => RuleOrigin::Manual,
            _ => RuleOrigin::Mined,
        },
        level: level.map(|l| l.parse::<Level>()).transpose().map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e))
        })?,
    })
}

fn audit_from_row(r: &Row<'_>) -> rusqlite::Result<AuditRow> {
    Ok(AuditRow {
        audit_id: r.get("audit_id")?,
        warning_id: r.get("warning_id")?,
        action: match r.get::<_, String>("action")?.as_str() {
            "fix" => ResolutionAction::Fix,
            _ => ResolutionAction::Dismiss,
        },
        episode_id: r.get("episode_id")?,
        previous_description: r.get("previous_description")?,
        new_description: r.get("new_description")?,
        resolved_at: r.get("resolved_at")?,
    })
}

fn match_exists(tx: &Connection, match_id: &str) -> Result<bool> {
    Ok(tx.query_row("SELECT 1 FROM matches WHERE match_id = ?1", [match_id], |_| Ok(())).optional()?.is_some())
}

fn require_match(tx: &Connection, match_id: &str) -> Result<()> {
    if match_exists(tx, match_id)? {
        Ok(())
    } else {
        Err(Error::NotFound(format!("match `{match_id}`")))
    }
}

fn insert_warning(tx: &Transaction<'_>, w: &Warning) -> Result<i64> {
    tx.execute(
        "INSERT INTO warnings (match_id, player, scope_key, half, start_s, end_s, rule, present_items,
             missing_items, severity, state)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
        params![
            w.match_id,
            w.player,
            w.scope_key,
            w.half,
            w.start_s,
            w.end_s,
            json(&w.rule)?,
            json(&w.present_items)?,
            json(&w.missing_items)?,
            w.severity,
            w.state.as_str(),
        ],
    )?;
    Ok(tx.last_insert_rowid())
}

impl Store {
    /// Opens (creating if needed) the store under `dir`.
    pub fn open(dir: &Path) -> Result<Store> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(DB_FILE);
        let conn = Connection::open(&path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        Store::init(conn, Some(path))
    }

    pub fn open_in_memory() -> Result<Store> {
        Store::init(Connection::open_in_memory()?, None)
    }

    fn init(conn: Connection, path: Option<PathBuf>) -> Result<Store> {
        conn.execute_batch(SCHEMA)?;
        let version: Option<String> =
            conn.query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get(0)).optional()?;
        match version.as_deref() {
            None => {
                conn.execute("INSERT INTO meta (key, value) VALUES ('schema_version', ?1)", [SCHEMA_VERSION])?;
            }
            Some(SCHEMA_VERSION) => {}
            Some(other) => return Err(Error::format(format!("store schema version {other} is not supported"))),
        }
        Ok(Store { conn: Mutex::new(conn), path })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Runs `f` in one transaction; nothing is written if it fails.
    fn write<T>(&self, f: impl FnOnce(&Transaction<'_>) -> Result<T>) -> Result<T> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    fn read<T>(&self, f: impl FnOnce(&Connection) -> Result<T>) -> Result<T> {
        let conn = self.lock();
        f(&conn)
    }

    // Matches.

    pub fn upsert_match(&self, meta: &MatchMeta) -> Result<()> {
        let bad = meta.invalid_fields();
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        self.write(|tx| {
            tx.execute(
                "INSERT INTO matches (match_id, name, teams) VALUES (?1, ?2, ?3)
                 ON CONFLICT (match_id) DO UPDATE SET name = excluded.name, teams = excluded.teams",
                params![meta.match_id, meta.name, json(&meta.teams)?],
            )?;
            tx.execute("DELETE FROM periods WHERE match_id = ?1", [&meta.match_id])?;
            tx.execute("DELETE FROM players WHERE match_id = ?1", [&meta.match_id])?;
            for p in &meta.periods {
                tx.execute(
                    "INSERT INTO periods (match_id, period_id, kickoff_wall_time, duration_s) VALUES (?1, ?2, ?3, ?4)",
                    params![
                        meta.match_id,
                        p.period_id,
                        p.kickoff_wall_time.to_rfc3339_opts(SecondsFormat::AutoSi, true),
                        p.duration_s
                    ],
                )?;
            }
            for (i, p) in meta.players.iter().enumerate() {
                tx.execute(
                    "INSERT INTO players (match_id, player_id, name, team, shirt_number, position)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                    params![meta.match_id, p.player_id, p.name, p.team, p.shirt_number, i as i64],
                )?;
            }
            Ok(())
        })
    }

    pub fn get_match(&self, match_id: &str) -> Result<MatchMeta> {
        self.read(|c| Store::load_match(c, match_id))
    }

    fn load_match(c: &Connection, match_id: &str) -> Result<MatchMeta> {
        let head: Option<(String, String)> = c
            .query_row("SELECT name, teams FROM matches WHERE match_id = ?1", [match_id], |r| Ok((r.get(0)?, r.get(1)?)))
            .optional()?;
        let Some((name, teams)) = head else {
            return Err(Error::NotFound(format!("match `{match_id}`")));
        };
        let mut stmt = c.prepare(
            "SELECT period_id, kickoff_wall_time, duration_s FROM periods WHERE match_id = ?1 ORDER BY period_id",
        )?;
        let periods = stmt
            .query_map([match_id], |r| {
                let t: String = r.get(1)?;
                let kickoff = DateTime::parse_from_rfc3339(&t)
                    .map_err(|e| rusqlite::Error::FromSqlConversionFailure(1, rusqlite::types::Type::Text, Box::new(e)))?
                    .with_timezone(&Utc);
                Ok(PeriodClock { period_id: r.get(0)?, kickoff_wall_time: kickoff, duration_s: r.get(2)? })
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        let mut stmt = c.prepare(
            "SELECT player_id, name, team, shirt_number FROM players WHERE match_id = ?1 ORDER BY position",
        )?;
        let players = stmt
            .query_map([match_id], |r| {
                Ok(RosterEntry { player_id: r.get(0)?, name: r.get(1)?, team: r.get(2)?, shirt_number: r.get(3)? })
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(MatchMeta { match_id: match_id.to_string(), name, teams: from_json(&teams)?, periods, players })
    }

    pub fn list_matches(&self) -> Result<Vec<MatchMeta>> {
        self.read(|c| {
            let ids: Vec<String> = c
                .prepare("SELECT match_id FROM matches ORDER BY match_id")?
                .query_map([], |r| r.get(0))?
                .collect::<rusqlite::Result<_>>()?;
            ids.iter().map(|id| Store::load_match(c, id)).collect()
        })
    }

    // Episodes and activity labels.

    /// Inserts or replaces episodes by (match, episode id), all in one batch.
    pub fn upsert_episodes(&self, match_id: &str, episodes: &[Episode]) -> Result<usize> {
        let mut bad = Vec::new();
        for (i, e) in episodes.iter().enumerate() {
            let prefix = format!("episodes[{i}]");
            bad.extend(e.invalid_fields(&prefix));
            if e.match_id != match_id {
                bad.push(format!("{prefix}.match_id"));
            }
            if e.tags.iter().any(|t| t.contains(';') || t.is_empty()) {
                bad.push(format!("{prefix}.tags"));
            }
        }
        bad.dedup();
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        self.write(|tx| {
            require_match(tx, match_id)?;
            let mut stmt = tx.prepare(
                "INSERT OR REPLACE INTO episodes
                 (match_id, episode_id, team, start_s, end_s, half, description, tags, player, notes)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
            )?;
            for e in episodes {
                stmt.execute(params![
                    e.match_id,
                    e.episode_id,
                    e.team,
                    e.start_s,
                    e.end_s,
                    e.half,
                    e.description,
                    e.tags.join(";"),
                    e.player,
                    e.notes
                ])?;
            }
            Ok(episodes.len())
        })
    }

    pub fn episodes(&self, match_id: &str) -> Result<Vec<Episode>> {
        self.read(|c| {
            require_match(c, match_id)?;
            let mut stmt = c.prepare("SELECT * FROM episodes WHERE match_id = ?1 ORDER BY episode_id")?;
            let rows = stmt.query_map([match_id], episode_from_row)?.collect::<rusqlite::Result<_>>()?;
            Ok(rows)
        })
    }

    /// Merges the prediction stream into activity rows and replaces the
    /// sensor rows of every (player, period) it covers. Applying the same
    /// stream twice leaves the same rows. Episodes are not touched.
    pub fn aggregate_labels(&self, match_id: &str, predictions: &[ActivityPrediction]) -> Result<Vec<ActivityLabelRow>> {
        let rows = merge_predictions(match_id, predictions);
        let keys: BTreeSet<(String, u32)> = rows.iter().map(|r| (r.player.clone(), r.period_id)).collect();
        self.write(|tx| {
            if !match_exists(tx, match_id)? {
                return Err(Error::argument(format!("predictions reference unknown match `{match_id}`")));
            }
            for (player, period) in &keys {
                tx.execute(
                    "DELETE FROM activity_labels
                     WHERE match_id = ?1 AND player = ?2 AND period_id = ?3 AND source = 'sensor'",
                    params![match_id, player, period],
                )?;
            }
            Store::insert_labels(tx, rows)
        })
    }

    /// Adds activity rows as given (for example manual labels).
    pub fn insert_activity_rows(&self, match_id: &str, rows: &[ActivityLabelRow]) -> Result<Vec<ActivityLabelRow>> {
        let mut bad = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            bad.extend(r.invalid_fields(&format!("activity[{i}]")));
            if r.match_id != match_id {
                bad.push(format!("activity[{i}].match_id"));
            }
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        self.write(|tx| {
            require_match(tx, match_id)?;
            Store::insert_labels(tx, rows.to_vec())
        })
    }

    fn insert_labels(tx: &Transaction<'_>, mut rows: Vec<ActivityLabelRow>) -> Result<Vec<ActivityLabelRow>> {
        let mut stmt = tx.prepare(
            "INSERT INTO activity_labels
             (match_id, player, period_id, start_s, end_s, activity_class, source, vote_fraction)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
        )?;
        for r in &mut rows {
            stmt.execute(params![
                r.match_id,
                r.player,
                r.period_id,
                r.start_s,
                r.end_s,
                r.activity_class,
                r.source.as_str(),
                r.vote_fraction
            ])?;
            r.label_id = Some(tx.last_insert_rowid());
        }
        Ok(rows)
    }

    pub fn activity_rows(&self, match_id: &str) -> Result<Vec<ActivityLabelRow>> {
        self.read(|c| {
            require_match(c, match_id)?;
            let mut stmt = c.prepare("SELECT * FROM activity_labels WHERE match_id = ?1 ORDER BY label_id")?;
            let rows = stmt.query_map([match_id], label_from_row)?.collect::<rusqlite::Result<_>>()?;
            Ok(rows)
        })
    }

    /// Episodes and activity rows of a match, optionally narrowed to one
    /// period and one player, ordered by start (episodes first on ties,
    /// then by id).
    pub fn query_events(&self, match_id: &str, period_id: Option<u32>, player: Option<&str>) -> Result<Vec<EventRow>> {
        self.read(|c| {
            require_match(c, match_id)?;
            let mut stmt = c.prepare(
                "SELECT * FROM episodes
                 WHERE match_id = ?1 AND (?2 IS NULL OR half = ?2) AND (?3 IS NULL OR player = ?3)
                 ORDER BY start_s, episode_id",
            )?;
            let mut events: Vec<EventRow> = stmt
                .query_map(params![match_id, period_id, player], episode_from_row)?
                .map(|r| r.map(EventRow::Episode))
                .collect::<rusqlite::Result<_>>()?;
            let mut stmt = c.prepare(
                "SELECT * FROM activity_labels
                 WHERE match_id = ?1 AND (?2 IS NULL OR period_id = ?2) AND (?3 IS NULL OR player = ?3)
                 ORDER BY start_s, label_id",
            )?;
            for row in stmt.query_map(params![match_id, period_id, player], label_from_row)? {
                events.push(EventRow::Activity(row?));
            }
            events.sort_by(event_order);
            Ok(events)
        })
    }

    /// Episodes and activity rows of a match as mining input. Activity rows
    /// take their team from the roster.
    pub fn timed_items(&self, match_id: &str) -> Result<Vec<TimedItem>> {
        let meta = self.get_match(match_id)?;
        let mut items = Vec::new();
        for e in self.episodes(match_id)? {
            items.push(TimedItem {
                match_id: e.match_id,
                half: e.half,
                player: e.player,
                team: Some(e.team).filter(|t| !t.is_empty()),
                start_s: e.start_s,
                end_s: e.end_s,
                item: e.description,
            });
        }
        for a in self.activity_rows(match_id)? {
            items.push(TimedItem {
                team: meta.team_of(&a.player).map(str::to_string),
                match_id: a.match_id,
                half: a.period_id,
                player: Some(a.player),
                start_s: a.start_s,
                end_s: a.end_s,
                item: a.activity_class,
            });
        }
        Ok(items)
    }

    // Rules.

    /// Replaces the stored rule set.
    pub fn replace_rules(&self, rules: &[AssociationRule]) -> Result<()> {
        self.write(|tx| {
            tx.execute("DELETE FROM rules", [])?;
            let mut stmt = tx.prepare(
                "INSERT INTO rules (antecedent, consequent, support, confidence, conviction, origin, level)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            )?;
            for r in rules {
                stmt.execute(params![
                    r.antecedent.join(";"),
                    r.consequent.join(";"),
                    r.support,
                    r.confidence,
                    r.conviction,
                    r.origin.as_str(),
                    r.level.map(|l| l.as_str())
                ])?;
            }
            Ok(())
        })
    }

    pub fn rules(&self) -> Result<Vec<AssociationRule>> {
        self.read(|c| {
            let mut stmt = c.prepare("SELECT * FROM rules ORDER BY rule_id")?;
            let rows = stmt.query_map([], rule_from_row)?.collect::<rusqlite::Result<_>>()?;
            Ok(rows)
        })
    }

    // Warnings.

    /// Replaces the match's open warnings with `found`, keeping resolved
    /// ones. A finding identical to a resolved warning is not raised again.
    /// Returns the warnings inserted, with their ids.
    pub fn replace_open_warnings(&self, match_id: &str, found: &[Warning]) -> Result<Vec<Warning>> {
        if let Some(w) = found.iter().find(|w| w.match_id != match_id) {
            return Err(Error::argument(format!("warning for match `{}` in a `{match_id}` batch", w.match_id)));
        }
        self.write(|tx| {
            require_match(tx, match_id)?;
            tx.execute("DELETE FROM warnings WHERE match_id = ?1 AND state = 'open'", [match_id])?;
            let resolved: Vec<Warning> = tx
                .prepare("SELECT * FROM warnings WHERE match_id = ?1")?
                .query_map([match_id], warning_from_row)?
                .collect::<rusqlite::Result<_>>()?;
            let mut inserted = Vec::new();
            for w in found {
                if resolved.iter().any(|r| r.same_finding(w)) {
                    continue;
                }
                let mut w = w.clone();
                w.state = WarningState::Open;
                w.warning_id = insert_warning(tx, &w)?;
                inserted.push(w);
            }
            Ok(inserted)
        })
    }

    /// Warnings of a match, ordered by start then severity (descending).
    pub fn warnings(&self, match_id: &str, state: Option<WarningState>) -> Result<Vec<Warning>> {
        self.read(|c| {
            require_match(c, match_id)?;
            let mut stmt = c.prepare("SELECT * FROM warnings WHERE match_id = ?1 AND (?2 IS NULL OR state = ?2)")?;
            let mut rows: Vec<Warning> = stmt
                .query_map(params![match_id, state.map(|s| s.as_str())], warning_from_row)?
                .collect::<rusqlite::Result<_>>()?;
            rows.sort_by(warning_order);
            Ok(rows)
        })
    }

    pub fn get_warning(&self, warning_id: i64) -> Result<Warning> {
        self.read(|c| {
            c.query_row("SELECT * FROM warnings WHERE warning_id = ?1", [warning_id], warning_from_row)
                .optional()?
                .ok_or_else(|| Error::NotFound(format!("warning {warning_id}")))
        })
    }

    /// Moves an open warning to fixed or dismissed and appends an audit row.
    /// A fix rewrites one episode's description in the same transaction.
    pub fn resolve_warning(&self, warning_id: i64, resolution: &Resolution) -> Result<Warning> {
        let corrected = resolution.corrected_description.as_deref().map(str::trim);
        if resolution.action == ResolutionAction::Fix && corrected.is_none_or(str::is_empty) {
            return Err(Error::Validation(vec!["corrected_description".into()]));
        }
        self.write(|tx| {
            let mut warning = tx
                .query_row("SELECT * FROM warnings WHERE warning_id = ?1", [warning_id], warning_from_row)
                .optional()?
                .ok_or_else(|| Error::NotFound(format!("warning {warning_id}")))?;
            if warning.state != WarningState::Open {
                return Err(Error::Conflict(format!("warning {warning_id} is already {}", warning.state)));
            }
            let (state, episode_id, previous, new) = match resolution.action {
                ResolutionAction::Dismiss => (WarningState::Dismissed, None, None, None),
                ResolutionAction::Fix => {
                    let episode = Store::fix_target(tx, &warning, resolution.episode_id)?;
                    let new = corrected.unwrap().to_string();
                    tx.execute(
                        "UPDATE episodes SET description = ?1 WHERE match_id = ?2 AND episode_id = ?3",
                        params![new, warning.match_id, episode.episode_id],
                    )?;
                    (WarningState::Fixed, Some(episode.episode_id), Some(episode.description), Some(new))
                }
            };
            tx.execute("UPDATE warnings SET state = ?1 WHERE warning_id = ?2", params![state.as_str(), warning_id])?;
            tx.execute(
                "INSERT INTO resolutions (warning_id, action, episode_id, previous_description, new_description, resolved_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![
                    warning_id,
                    match resolution.action {
                        ResolutionAction::Fix => "fix",
                        ResolutionAction::Dismiss => "dismiss",
                    },
                    episode_id,
                    previous,
                    new,
                    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
                ],
            )?;
            warning.state = state;
            Ok(warning)
        })
    }

    fn fix_target(tx: &Transaction<'_>, warning: &Warning, episode_id: Option<i64>) -> Result<Episode> {
        if let Some(id) = episode_id {
            return tx
                .query_row(
                    "SELECT * FROM episodes WHERE match_id = ?1 AND episode_id = ?2",
                    params![warning.match_id, id],
                    episode_from_row,
                )
                .optional()?
                .ok_or_else(|| Error::Validation(vec!["episode_id".into()]));
        }
        let candidates: Vec<Episode> = tx
            .prepare(
                "SELECT * FROM episodes
                 WHERE match_id = ?1 AND half = ?2 AND start_s < ?4 AND end_s >= ?3
                 ORDER BY start_s, episode_id",
            )?
            .query_map(params![warning.match_id, warning.half, warning.start_s, warning.end_s], episode_from_row)?
            .collect::<rusqlite::Result<_>>()?;
        let in_scope: Vec<Episode> = candidates
            .into_iter()
            .filter(|e| match &warning.player {
                Some(p) => e.player.as_deref() == Some(p.as_str()),
                None => warning.scope_key.is_empty() || e.team == warning.scope_key,
            })
            .collect();
        let pick = in_scope
            .iter()
            .find(|e| warning.rule.antecedent.contains(&e.description))
            .or_else(|| in_scope.first())
            .cloned();
        pick.ok_or_else(|| Error::Validation(vec!["episode_id".into()]))
    }

    pub fn audit(&self, warning_id: Option<i64>) -> Result<Vec<AuditRow>> {
        self.read(|c| {
            let mut stmt =
                c.prepare("SELECT * FROM resolutions WHERE (?1 IS NULL OR warning_id = ?1) ORDER BY audit_id")?;
            let rows = stmt.query_map([warning_id], audit_from_row)?.collect::<rusqlite::Result<_>>()?;
            Ok(rows)
        })
    }
}
