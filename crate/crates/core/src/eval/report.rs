use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::EvalReport;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    /// Per-class table, averages row, then the confusion grid, comma separated.
    Delimited,
    /// The full report as a JSON document.
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" | "delimited" => Ok(ReportFormat::Delimited),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::argument(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(report)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        ReportFormat::Delimited => {
            let mut out = String::from("class,precision,recall,f_score,support\n");
            for m in &report.per_class {
                writeln!(out, "{},{:.6},{:.6},{:.6},{}", m.class, m.precision, m.recall, m.f_score, m.support).unwrap();
            }
            let a = &report.averages;
            writeln!(out, "average,{:.6},{:.6},{:.6},{}", a.precision, a.recall, a.f_score, report.total()).unwrap();
            out.push('\n');
            out.push_str("true\\predicted");
            for c in &report.classes {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
            for (c, row) in report.classes.iter().zip(&report.confusion) {
                out.push_str(c);
                for n in row {
                    write!(out, ",{n}").unwrap();
                }
                out.push('\n');
            }
            Ok(out.into_bytes())
        }
    }
}
