//! Feature matrix export.
//!
//! Delimited text: a header of `subject,label,player,period,start_t,duration_s`
//! followed by the canonical feature names, one row per vector.
//!
//! Binary: little-endian `u32 rows`, `u32 cols`, then `rows × cols` `f64`
//! values in row-major order. Only the values are stored.

use crate::error::{Error, Result};

use super::{feature_names, FeatureVector, WindowRef, FEATURES_PER_DEVICE};

const META_COLUMNS: [&str; 6] = ["subject", "label", "player", "period", "start_t", "duration_s"];

pub fn write_csv(vectors: &[FeatureVector]) -> Result<Vec<u8>> {
    let cols = vectors.first().map_or(0, |v| v.values.len());
    if vectors.iter().any(|v| v.values.len() != cols) {
        return Err(Error::argument("feature vectors differ in arity"));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = META_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(feature_names(cols / FEATURES_PER_DEVICE));
    writer.write_record(&header).map_err(csv_err)?;
    for v in vectors {
        let mut record = vec![
            v.subject.clone(),
            v.label.clone().unwrap_or_default(),
            v.window.player_id.clone(),
            v.window.period_id.to_string(),
            v.window.start_t.to_string(),
            v.window.duration_s.to_string(),
        ];
        record.extend(v.values.iter().map(f64::to_string));
        writer.write_record(&record).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_csv(bytes: &[u8]) -> Result<Vec<FeatureVector>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.len() < META_COLUMNS.len() || header.iter().zip(META_COLUMNS).any(|(a, b)| a != b) {
        return Err(Error::format(format!("feature table header must start with {}", META_COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let num = |idx: usize| -> Result<f64> {
            record[idx]
                .parse()
                .map_err(|_| Error::Row { row, message: format!("bad number `{}` in `{}`", &record[idx], &header[idx]) })
        };
        let values = (META_COLUMNS.len()..record.len()).map(num).collect::<Result<Vec<_>>>()?;
        out.push(FeatureVector {
            values,
            subject: record[0].to_string(),
            label: Some(record[1].to_string()).filter(|l| !l.is_empty()),
            window: WindowRef {
                player_id: record[2].to_string(),
                period_id: record[3]
                    .parse()
                    .map_err(|_| Error::Row { row, message: format!("bad period `{}`", &record[3]) })?,
                start_t: num(4)?,
                duration_s: num(5)?,
            },
        });
    }
    Ok(out)
}

pub fn write_binary(rows: &[&[f64]]) -> Result<Vec<u8>> {
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::argument("rows differ in length"));
    }
    let mut out = Vec::with_capacity(8 + rows.len() * cols * 8);
    out.extend_from_slice(&u32::try_from(rows.len()).map_err(|_| Error::argument("too many rows"))?.to_le_bytes());
    out.extend_from_slice(&u32::try_from(cols).map_err(|_| Error::argument("too many columns"))?.to_le_bytes());
    for row in rows {
        for v in *row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_binary(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let word = |offset: usize| -> Result<u32> {
        bytes
            .get(offset..offset + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or(Error::Decode { offset, message: "truncated header".into() })
    };
    let rows = word(0)? as usize;
    let cols = word(4)? as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(8))
        .ok_or(Error::Decode { offset: 0, message: "dimensions overflow".into() })?;
    if bytes.len() != expected {
        return Err(Error::Decode {
            offset: bytes.len().min(expected),
            message: format!("expected {expected} bytes for {rows}x{cols}, found {}", bytes.len()),
        });
    }
    if cols == 0 {
        return Ok(vec![Vec::new(); rows]);
    }
    Ok(bytes[8..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect::<Vec<_>>()
        .chunks(cols)
        .map(<[f64]>::to_vec)
        .collect())
}

fn csv_err(e: csv::Error) -> Error {
    Error::format(e.to_string())
}
