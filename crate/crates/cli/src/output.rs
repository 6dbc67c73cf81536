//! CSV and JSON rendering. Both are byte-for-byte deterministic: fixed
//! float formatting with 12 significant digits and sorted summary keys.

use std::fmt::Write;

use clap::ValueEnum;
use fourport::experiments::Table;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

fn number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        x.to_string()
    }
}

/// Schema line, one `# key: value` line per summary entry, header, rows.
pub fn csv(table: &Table) -> String {
    let mut s = String::new();
    writeln!(s, "# schema: {}", table.schema).unwrap();
    for (key, value) in &table.summary {
        writeln!(s, "# {key}: {value}").unwrap();
    }
    writeln!(s, "{}", table.columns.join(",")).unwrap();
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&x| number(x)).collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    s
}

pub fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output is serializable");
    s.push('\n');
    s
}
