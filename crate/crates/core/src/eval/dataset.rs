//! Loader for the public daily-and-sports-activities corpus.
//!
//! Layout (the `data/` directory of the distribution, or its parent):
//!
//! ```text
//! a01/ … a19/          one directory per activity, label A1 … A19
//!   p1/ … p8/          one directory per subject
//!     s01.txt … s60.txt  one 5 s segment each
//! ```
//!
//! A segment file has 125 rows (25 Hz × 5 s) of 45 comma-separated values:
//! five units (torso, right arm, left arm, right leg, left leg), each with
//! x/y/z accelerometer, x/y/z gyroscope and x/y/z magnetometer columns. That
//! is exactly the canonical per-device channel order, so unit `u` becomes
//! device `u`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, SignalWindow};

pub const SAMPLE_RATE_HZ: f64 = 25.0;
pub const SEGMENT_SECONDS: f64 = 5.0;
pub const SEGMENT_ROWS: usize = 125;
pub const UNITS: usize = 5;
pub const COLUMNS: usize = UNITS * 9;

#[derive(Clone, Debug)]
pub struct Segment {
    pub activity: String,
    pub subject: String,
    pub index: usize,
    pub path: PathBuf,
}

fn numbered_dirs(dir: &Path, prefix: char) -> Result<Vec<(usize, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(rest) = name.strip_prefix(prefix) else { continue };
        let Ok(n) = rest.trim_end_matches(".txt").parse::<usize>() else { continue };
        out.push((n, entry.path()));
    }
    out.sort();
    Ok(out)
}

/// Lists all segment files under `root`, ordered by activity, subject, index.
pub fn list_segments(root: &Path) -> Result<Vec<Segment>> {
    let root = if root.join("data").is_dir() { root.join("data") } else { root.to_path_buf() };
    let activities = numbered_dirs(&root, 'a')?;
    if activities.is_empty() {
        return Err(Error::format(format!("no activity directories (a01 …) under {}", root.display())));
    }
    let mut segments = Vec::new();
    for (a, activity_dir) in activities {
        for (p, subject_dir) in numbered_dirs(&activity_dir, 'p')? {
            for (s, path) in numbered_dirs(&subject_dir, 's')? {
                segments.push(Segment { activity: format!("A{a}"), subject: format!("p{p}"), index: s, path });
            }
        }
    }
    Ok(segments)
}

/// Parses one segment file into a five-device window.
pub fn read_segment(segment: &Segment) -> Result<SignalWindow> {
    let text = fs::read_to_string(&segment.path)?;
    let mut columns = vec![Vec::with_capacity(SEGMENT_ROWS); COLUMNS];
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != COLUMNS {
            return Err(Error::format(format!(
                "{}: row {} has {} columns, expected {COLUMNS}",
                segment.path.display(),
                i + 1,
                fields.len()
            )));
        }
        for (column, field) in columns.iter_mut().zip(fields) {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(format!("{}: row {}: bad value `{field}`", segment.path.display(), i + 1))
            })?;
            column.push(v);
        }
    }
    let start_t = (segment.index.saturating_sub(1)) as f64 * SEGMENT_SECONDS;
    SignalWindow::from_columns(segment.subject.as_str(), 1, start_t, SEGMENT_SECONDS, columns)
        .map_err(|e| Error::format(format!("{}: {e}", segment.path.display())))
}

/// Loads every segment and extracts its labeled feature vector.
pub fn load_feature_vectors(root: &Path) -> Result<Vec<FeatureVector>> {
    let segments = list_segments(root)?;
    segments
        .par_iter()
        .map(|segment| {
            let window = read_segment(segment)?;
            let mut fv = extract_features(&window, SAMPLE_RATE_HZ)?;
            fv.subject = segment.subject.clone();
            fv.label = Some(segment.activity.clone());
            Ok(fv)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn fixture_layout_loads() {
        let dir = tempfile::tempdir().unwrap();
        synth::write_activity_corpus(dir.path(), 3, 2, 4, 7).unwrap();
        let segments = list_segments(dir.path()).unwrap();
        assert_eq!(segments.len(), 3 * 2 * 4);
        assert_eq!(segments[0].activity, "A1");
        assert_eq!(segments[0].subject, "p1");
        let w = read_segment(&segments[5]).unwrap();
        assert_eq!(w.device_count(), 5);
        assert_eq!(w.len(), 125);
        let vectors = load_feature_vectors(dir.path()).unwrap();
        assert_eq!(vectors.len(), 24);
        assert!(vectors.iter().all(|v| v.values.len() == 1170));
        assert_eq!(vectors[23].label.as_deref(), Some("A3"));
    }

    #[test]
    fn data_subdirectory_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        synth::write_activity_corpus(&dir.path().join("data"), 2, 2, 1, 1).unwrap();
        assert_eq!(list_segments(dir.path()).unwrap().len(), 4);
    }

    #[test]
    fn malformed_rows_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a01/p1");
        fs::create_dir_all(&path).unwrap();
        fs::write(path.join("s01.txt"), "1,2,3\n").unwrap();
        let segments = list_segments(dir.path()).unwrap();
        let err = read_segment(&segments[0]).unwrap_err();
        assert!(err.to_string().contains("3 columns"), "{err}");
        assert!(list_segments(&dir.path().join("a01")).is_err());
    }
}
