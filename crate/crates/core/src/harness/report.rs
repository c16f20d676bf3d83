//! Report serialization: fixed-order CSV cells and full structured JSON.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::harness::ExperimentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(crate::error::Error::InvalidArgument(format!(
                "unknown format {other:?}, expected csv or json"
            ))),
        }
    }
}

/// 17 significant digits, enough for exact f64 round trips.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl ExperimentReport {
    /// Fixed column order: scheme,r,squared_bias,variance,mse,failed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,r,squared_bias,variance,mse,failed\n");
        for cell in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.scheme.kind,
                cell.r,
                format_f64(cell.squared_bias),
                format_f64(cell.variance),
                format_f64(cell.mse),
                cell.failed_replicates
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Write the report in the requested format.
pub fn write_report(
    report: &ExperimentReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => {
            let mut text = report.to_json()?;
            text.push('\n');
            text
        }
    };
    let mut file = File::create(path.as_ref())?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
