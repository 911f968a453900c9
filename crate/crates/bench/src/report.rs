//! Report rows and their table, CSV and JSON renderings.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const CSV_HEADER: [&str; 5] = ["scenario", "metric", "simulated", "reference", "source"];
const NA: &str = "n/a";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub metric: String,
    pub simulated: f64,
    pub reference: Option<f64>,
    /// Table or figure the reference comes from.
    pub source: Option<String>,
}

impl ReportRow {
    /// Simulated over reference.
    pub fn ratio(&self) -> Option<f64> {
        self.reference.filter(|r| *r != 0.0).map(|r| self.simulated / r)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), num)
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, scenario: &str, metric: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.scenario.as_str(),
                r.metric.as_str(),
                &num(r.simulated),
                &opt_num(r.reference),
                r.source.as_deref().unwrap_or(NA),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn from_csv(text: &str) -> Result<Self, BenchError> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| BenchError::Csv(e.to_string()))?;
        if header.iter().ne(CSV_HEADER) {
            return Err(BenchError::Csv(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| BenchError::Csv(format!("`{s}`: {e}")));
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| BenchError::Csv(e.to_string()))?;
            rows.push(ReportRow {
                scenario: rec[0].to_string(),
                metric: rec[1].to_string(),
                simulated: parse(&rec[2])?,
                reference: if &rec[3] == NA { None } else { Some(parse(&rec[3])?) },
                source: (&rec[4] != NA).then(|| rec[4].to_string()),
            });
        }
        Ok(Report { rows })
    }

    /// Writes the CSV rendering. An empty report is refused unless
    /// `allow_empty` is set.
    pub fn emit_csv(&self, path: &Path, allow_empty: bool) -> Result<(), BenchError> {
        if self.is_empty() && !allow_empty {
            return Err(BenchError::EmptyReport);
        }
        std::fs::write(path, self.to_csv()).map_err(|e| BenchError::io(path, e))
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            #[serde(flatten)]
            row: &'a ReportRow,
            ratio: Option<f64>,
        }
        let rows: Vec<Row> = self.rows.iter().map(|row| Row { row, ratio: row.ratio() }).collect();
        serde_json::to_string_pretty(&rows).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let header = ["scenario", "metric", "simulated", "reference", "ratio", "source"];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.scenario.clone(),
                    r.metric.clone(),
                    format!("{:.1}", r.simulated),
                    r.reference.map_or_else(|| NA.into(), |v| format!("{v}")),
                    r.ratio().map_or_else(|| NA.into(), |v| format!("{v:.3}")),
                    r.source.clone().unwrap_or_else(|| NA.into()),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: [&str; 6]| {
            let mut l = String::new();
            for (i, (c, w)) in row.iter().zip(width).enumerate() {
                if i > 1 && i < 5 {
                    let _ = write!(l, "{c:>w$}  ");
                } else {
                    let _ = write!(l, "{c:<w$}  ");
                }
            }
            out.push_str(l.trim_end());
            out.push('\n');
        };
        line(&mut out, header);
        for row in &cells {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3], &row[4], &row[5]].map(String::as_str));
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.to_table(),
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json() + "\n",
        }
    }
}
