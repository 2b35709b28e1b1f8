use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;

use crate::error::{Error, Result};
use crate::mining::write_rules;

use super::{write_episode_file, Store};

/// Tables dumped column for column.
const RAW_TABLES: [(&str, &str); 7] = [
    ("meta", "key"),
    ("matches", "match_id"),
    ("periods", "match_id, period_id"),
    ("players", "match_id, position"),
    ("activity_labels", "label_id"),
    ("warnings", "warning_id"),
    ("resolutions", "audit_id"),
];

fn cell(v: ValueRef<'_>) -> String {
    match v {
        ValueRef::Null => String::new(),
        ValueRef::Integer(i) => i.to_string(),
        ValueRef::Real(f) if f.is_infinite() && f > 0.0 => "inf".into(),
        ValueRef::Real(f) => f.to_string(),
        ValueRef::Text(t) | ValueRef::Blob(t) => String::from_utf8_lossy(t).into_owned(),
    }
}

impl Store {
    /// Writes every table under `dir` as delimited text: `episodes.csv` in
    /// the episode file layout, `rules.txt` in the rules file layout, and
    /// one comma-separated file per remaining table.
    pub fn export_tables(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (table, order) in RAW_TABLES {
            let bytes = self.read(|c| {
                let mut stmt = c.prepare(&format!("SELECT * FROM {table} ORDER BY {order}"))?;
                let names: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
                let mut w = csv::Writer::from_writer(Vec::new());
                let csv_err = |e: csv::Error| Error::format(e.to_string());
                w.write_record(&names).map_err(csv_err)?;
                let mut rows = stmt.query([])?;
                while let Some(row) = rows.next()? {
                    let record: Vec<String> =
                        (0..names.len()).map(|i| row.get_ref(i).map(cell)).collect::<rusqlite::Result<_>>()?;
                    w.write_record(&record).map_err(csv_err)?;
                }
                w.into_inner().map_err(|e| Error::format(e.to_string()))
            })?;
            let path = dir.join(format!("{table}.csv"));
            std::fs::write(&path, bytes)?;
            written.push(path);
        }

        let mut episodes = Vec::new();
        for m in self.list_matches()? {
            episodes.extend(self.episodes(&m.match_id)?);
        }
        let path = dir.join("episodes.csv");
        std::fs::write(&path, write_episode_file(&episodes)?)?;
        written.push(path);

        let path = dir.join("rules.txt");
        std::fs::write(&path, write_rules(&self.rules()?, None)?)?;
        written.push(path);
        Ok(written)
    }
}
