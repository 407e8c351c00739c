use std::io::{self, Write};

use cbir_core::simulation::{SimulationReport, CSV_HEADER};
use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Csv,
    Json,
}

/// Rows printed as TSV, CSV or a JSON array of objects.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
    record: bool,
}

impl Table {
    pub fn new<const N: usize>(header: [&'static str; N]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
            record: false,
        }
    }

    /// A one-row table printed as a JSON object rather than an array.
    pub fn record<const N: usize>(header: [&'static str; N], cells: [Value; N]) -> Self {
        let mut t = Self::new(header);
        t.row(cells);
        t.record = true;
        t
    }

    pub fn row<const N: usize>(&mut self, cells: [Value; N]) {
        debug_assert_eq!(N, self.header.len());
        self.rows.push(cells.to_vec());
    }

    pub fn write(&self, out: &mut impl Write, format: Format) -> io::Result<()> {
        match format {
            Format::Tsv => {
                writeln!(out, "{}", self.header.join("\t"))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|c| text(c).replace(['\t', '\n'], " ")).collect();
                    writeln!(out, "{}", cells.join("\t"))?;
                }
            }
            Format::Csv => {
                writeln!(out, "{}", self.header.join(","))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|c| csv_cell(&text(c))).collect();
                    writeln!(out, "{}", cells.join(","))?;
                }
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .header
                            .iter()
                            .zip(row)
                            .map(|(h, c)| (h.to_string(), c.clone()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let value = if self.record {
                    rows.into_iter().next().unwrap_or_default()
                } else {
                    Value::Array(rows)
                };
                writeln!(out, "{value}")?;
            }
        }
        Ok(())
    }
}

fn csv_cell(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn text(cell: &Value) -> String {
    match cell {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn report(out: &mut impl Write, format: Format, report: &SimulationReport) -> cbir_core::error::Result<()> {
    match format {
        Format::Csv => report.write_csv(out)?,
        Format::Json => writeln!(out, "{}", report.to_json())?,
        Format::Tsv => {
            writeln!(out, "{}", CSV_HEADER.replace(',', "\t"))?;
            for r in &report.rows {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.query_name.replace(['\t', '\n'], " "),
                    r.ri,
                    r.ai,
                    r.rai,
                    r.iri,
                    r.anr,
                    r.inr,
                    r.precision,
                    r.recall
                )?;
            }
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "mean\t\t\t\t\t\t\t{}\t{}",
                fmt(report.aggregate.mean_precision),
                fmt(report.aggregate.mean_recall)
            )?;
        }
    }
    Ok(())
}

pub fn aggregate(
    out: &mut impl Write,
    format: Format,
    index_id: u64,
    report: &SimulationReport,
) -> io::Result<()> {
    Table::record(
        ["indexId", "queries", "meanPrecision", "meanRecall"],
        [
            index_id.into(),
            report.rows.len().into(),
            report.aggregate.mean_precision.into(),
            report.aggregate.mean_recall.into(),
        ],
    )
    .write(out, format)
}
