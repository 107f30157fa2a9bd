//! Text, CSV and JSON renderings of solve reports.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{BenchmarkSpec, SolveReport};
use crate::diagnostics::HypothesisReport;
use crate::error::{Error, Result};
use crate::tracker::TraceStatus;

pub const COLUMNS: [&str; 7] = ["method", "N_c", "hsol", "nsol", "fhom", "fnew", "time(s)"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(OutputFormat::Table),
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown output format `{other}`"))),
        }
    }
}

/// Serialized form of a [`SolveReport`]; empty vectors mark absent values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    #[serde(rename = "Nc")]
    pub nc: Option<usize>,
    pub hsol: Vec<f64>,
    pub nsol: Vec<f64>,
    pub fhom: Vec<f64>,
    pub fnew: Vec<f64>,
    pub time_s: f64,
    pub status: TraceStatus,
}

fn to_vec(v: &Option<DVector<f64>>) -> Vec<f64> {
    v.as_ref().map(|v| v.iter().copied().collect()).unwrap_or_default()
}

impl From<&SolveReport> for ReportRow {
    fn from(r: &SolveReport) -> Self {
        Self {
            method: r.method.clone(),
            nc: r.nc,
            hsol: to_vec(&r.hsol),
            nsol: to_vec(&r.nsol),
            fhom: to_vec(&r.fhom),
            fnew: to_vec(&r.fnew),
            time_s: r.time_s,
            status: r.status,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    /// The run's spec, or `{"runs": [...]}` when several specs were run.
    pub spec: serde_json::Value,
    pub rows: Vec<ReportRow>,
    pub diagnostics: Vec<HypothesisReport>,
}

pub fn parse_json(text: &str) -> Result<JsonReport> {
    serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("bad report JSON: {e}")))
}

fn fmt_solution(v: &[f64], sep: &str) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(|x| format!("{x:.7}")).collect::<Vec<_>>().join(sep)
}

fn fmt_residual(v: &[f64], sep: &str) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(|x| format!("{x:.8e}")).collect::<Vec<_>>().join(sep)
}

fn cells(row: &ReportRow, sep: &str) -> [String; 7] {
    [
        row.method.clone(),
        row.nc.map_or_else(|| "-".into(), |n| n.to_string()),
        fmt_solution(&row.hsol, sep),
        fmt_solution(&row.nsol, sep),
        fmt_residual(&row.fhom, sep),
        fmt_residual(&row.fnew, sep),
        format!("{:.4}", row.time_s),
    ]
}

fn spec_value(specs: &[BenchmarkSpec]) -> Result<serde_json::Value> {
    let v = match specs {
        [one] => serde_json::to_value(one),
        many => serde_json::to_value(many).map(|runs| serde_json::json!({ "runs": runs })),
    };
    v.map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Renders `reports` in `format`. Text and CSV carry the seven table
/// columns; JSON also carries the spec and hypothesis reports.
pub fn emit_table(specs: &[BenchmarkSpec], reports: &[SolveReport], format: OutputFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("no reports to emit".into()));
    }
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
    match format {
        OutputFormat::Json => {
            let doc = JsonReport {
                spec: spec_value(specs)?,
                rows,
                diagnostics: reports.iter().flat_map(|r| r.diagnostics.iter().cloned()).collect(),
            };
            serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidParameter(e.to_string()))
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::InvalidParameter(e.to_string());
            w.write_record(COLUMNS).map_err(io)?;
            for row in &rows {
                w.write_record(cells(row, ";")).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        OutputFormat::Table => {
            let body: Vec<[String; 7]> = rows.iter().map(|r| cells(r, " ")).collect();
            let mut widths = COLUMNS.map(str::len);
            for r in &body {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cols: &[String]| {
                cols.iter()
                    .zip(widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            let mut out = line(&COLUMNS.map(String::from));
            out.push('\n');
            for r in &body {
                out.push_str(&line(r));
                out.push('\n');
            }
            Ok(out)
        }
    }
}
