use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Entry, Scope};

/// One episode or activity row reduced to what mining looks at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedItem {
    pub match_id: String,
    pub half: u32,
    pub player: Option<String>,
    pub team: Option<String>,
    pub start_s: f64,
    pub end_s: f64,
    /// Episode description or activity class.
    pub item: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryParams {
    pub window_s: f64,
    pub step_s: f64,
    pub scope: Scope,
}

impl Default for EntryParams {
    fn default() -> Self {
        EntryParams { window_s: 10.0, step_s: 5.0, scope: Scope::PerPlayer }
    }
}

fn scope_key(row: &TimedItem, scope: Scope) -> Option<&str> {
    match scope {
        Scope::PerPlayer => row.player.as_deref(),
        Scope::PerTeam => row.team.as_deref(),
        Scope::PerMatch => Some(""),
    }
    .filter(|k| scope == Scope::PerMatch || !k.is_empty())
}

/// Slides a `[t, t + window_s)` window in steps of `step_s` over every
/// (match, half, scope key) partition, starting at the partition's earliest
/// row. A row lands in a window when `row.start < t + window_s` and
/// `row.end >= t`. Rows without a key for the scope (a team event in
/// per-player scope) are skipped. Empty windows yield no entry.
pub fn build_entries(rows: &[TimedItem], params: &EntryParams) -> Result<Vec<Entry>> {
    let EntryParams { window_s: w, step_s: s, scope } = *params;
    if !(w > 0.0 && w.is_finite()) || !(s > 0.0 && s <= w) {
        return Err(Error::argument(format!("need window_s > 0 and 0 < step_s <= window_s, got {w} and {s}")));
    }
    let mut groups: BTreeMap<(&str, u32, &str), Vec<&TimedItem>> = BTreeMap::new();
    for row in rows {
        if !(row.start_s <= row.end_s) {
            return Err(Error::argument(format!("row `{}` ends before it starts", row.item)));
        }
        if let Some(key) = scope_key(row, scope) {
            groups.entry((row.match_id.as_str(), row.half, key)).or_default().push(row);
        }
    }

    let mut entries = Vec::new();
    for ((match_id, half, key), group) in groups {
        let origin = group.iter().map(|r| r.start_s).fold(f64::INFINITY, f64::min);
        let t = |k: i64| origin + k as f64 * s;
        let mut windows: BTreeMap<i64, BTreeSet<&str>> = BTreeMap::new();
        for row in &group {
            // Approximate index range, then the exact predicate decides.
            let lo = (((row.start_s - w - origin) / s).floor() as i64).max(0);
            let hi = ((row.end_s - origin) / s).floor() as i64 + 1;
            for k in lo..=hi {
                if row.start_s < t(k) + w && row.end_s >= t(k) {
                    windows.entry(k).or_default().insert(row.item.as_str());
                }
            }
        }
        for (k, items) in windows {
            entries.push(Entry {
                items: items.into_iter().map(str::to_string).collect(),
                match_id: match_id.to_string(),
                player: (scope == Scope::PerPlayer).then(|| key.to_string()),
                scope_key: key.to_string(),
                half,
                start_s: t(k),
                end_s: t(k) + w,
            });
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(player: &str, team: &str, start: f64, end: f64, item: &str) -> TimedItem {
        TimedItem {
            match_id: "m1".into(),
            half: 1,
            player: Some(player.into()),
            team: Some(team.into()),
            start_s: start,
            end_s: end,
            item: item.into(),
        }
    }

    fn items(e: &Entry) -> Vec<&str> {
        e.items.iter().map(String::as_str).collect()
    }

    #[test]
    fn overlapping_rows_share_the_first_entry() {
        let rows = [row("p1", "H", 0.0, 2.0, "Pass"), row("p1", "H", 3.0, 4.0, "Reception")];
        let entries = build_entries(&rows, &EntryParams::default()).unwrap();
        assert_eq!(items(&entries[0]), ["Pass", "Reception"]);
        assert_eq!((entries[0].start_s, entries[0].end_s), (0.0, 10.0));
        // [-5, 5) is never generated: windows start at the earliest row.
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn items_are_sets() {
        let rows = [row("p1", "H", 0.0, 1.0, "Pass"), row("p1", "H", 2.0, 3.0, "Pass")];
        let entries = build_entries(&rows, &EntryParams::default()).unwrap();
        assert_eq!(items(&entries[0]), ["Pass"]);
    }

    #[test]
    fn scope_partitions_rows() {
        let rows = [row("A", "H", 0.0, 2.0, "Pass"), row("B", "H", 0.0, 4.0, "Kicking")];
        let per_player = build_entries(&rows, &EntryParams::default()).unwrap();
        assert_eq!(per_player.len(), 2);
        assert!(per_player.iter().all(|e| e.items.len() == 1));
        assert_eq!(per_player[0].player.as_deref(), Some("A"));

        let per_team = build_entries(&rows, &EntryParams { scope: Scope::PerTeam, ..Default::default() }).unwrap();
        assert_eq!(items(&per_team[0]), ["Kicking", "Pass"]);
        assert_eq!(per_team[0].player, None);
        assert_eq!(per_team[0].scope_key, "H");
    }

    #[test]
    fn row_touching_window_start_is_included() {
        // Ends exactly at t = 5: row.end >= t holds for the second window.
        let rows = [row("p", "H", 0.0, 5.0, "Run"), row("p", "H", 12.0, 13.0, "Pass")];
        let entries = build_entries(&rows, &EntryParams::default()).unwrap();
        let at5 = entries.iter().find(|e| e.start_s == 5.0).unwrap();
        assert_eq!(items(at5), ["Pass", "Run"]);
    }

    #[test]
    fn empty_windows_are_dropped() {
        let rows = [row("p", "H", 0.0, 1.0, "Pass"), row("p", "H", 100.0, 101.0, "Shot")];
        let entries = build_entries(&rows, &EntryParams::default()).unwrap();
        let starts: Vec<f64> = entries.iter().map(|e| e.start_s).collect();
        assert_eq!(starts, [0.0, 95.0, 100.0]);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let rows = [row("p", "H", 0.0, 1.0, "Pass")];
        for (w, s) in [(0.0, 1.0), (10.0, 0.0), (10.0, 11.0)] {
            assert!(build_entries(&rows, &EntryParams { window_s: w, step_s: s, scope: Scope::PerPlayer }).is_err());
        }
    }

    fn arb_rows() -> impl Strategy<Value = Vec<TimedItem>> {
        prop::collection::vec((0u8..3, 0u32..200, 0u32..20, 0u8..5), 1..40).prop_map(|v| {
            v.into_iter()
                .map(|(p, start, len, item)| {
                    let start = start as f64 * 0.5;
                    row(&format!("p{p}"), "H", start, start + len as f64 * 0.5, &format!("I{item}"))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn shift_invariance(rows in arb_rows(), delta in -1000i32..1000) {
            let params = EntryParams::default();
            let base = build_entries(&rows, &params).unwrap();
            let shifted_rows: Vec<TimedItem> = rows
                .iter()
                .map(|r| TimedItem { start_s: r.start_s + delta as f64, end_s: r.end_s + delta as f64, ..r.clone() })
                .collect();
            let shifted = build_entries(&shifted_rows, &params).unwrap();
            let a: Vec<_> = base.iter().map(|e| (&e.scope_key, &e.items)).collect();
            let b: Vec<_> = shifted.iter().map(|e| (&e.scope_key, &e.items)).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn every_entry_matches_the_overlap_rule(rows in arb_rows()) {
            let params = EntryParams::default();
            for e in build_entries(&rows, &params).unwrap() {
                let expected: BTreeSet<String> = rows
                    .iter()
                    .filter(|r| r.player.as_deref() == Some(e.scope_key.as_str()))
                    .filter(|r| r.start_s < e.end_s && r.end_s >= e.start_s)
                    .map(|r| r.item.clone())
                    .collect();
                prop_assert!(!e.items.is_empty());
                prop_assert_eq!(&e.items, &expected);
            }
        }
    }
}
