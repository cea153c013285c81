use anyhow::Result;
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use crate::schema::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

/// A command result in both a structured and a tabular view.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub command: &'static str,
    pub json: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Rendered {
    pub fn new(command: &'static str, body: &impl Serialize, header: &[&str]) -> Result<Self> {
        Ok(Self {
            command,
            json: serde_json::to_value(body)?,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        })
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => {
                let doc = json!({ "schema_version": SCHEMA_VERSION, "command": self.command, "result": self.json });
                Ok(serde_json::to_string_pretty(&doc)? + "\n")
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header)?;
                for r in &self.rows {
                    w.write_record(r)?;
                }
                Ok(String::from_utf8(w.into_inner()?)?)
            }
            Format::Table => Ok(table(&self.header, &self.rows)),
        }
    }
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> =
            cells.iter().zip(&width).map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out += &line(&width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>());
    for r in rows {
        out += &line(r);
    }
    out
}

pub fn num(x: f64) -> String {
    // Drop the sign of negative zero.
    format!("{:.12e}", x + 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        let mut r = Rendered::new("solve", &json!({"a": 1}), &["k", "lambda"]).unwrap();
        r.row(vec!["1".into(), "0.5".into()]);
        let j: Value = serde_json::from_str(&r.render(Format::Json).unwrap()).unwrap();
        assert_eq!(j["schema_version"], SCHEMA_VERSION);
        assert_eq!(j["result"]["a"], 1);
        assert_eq!(r.render(Format::Csv).unwrap(), "k,lambda\n1,0.5\n");
        let t = r.render(Format::Table).unwrap();
        assert_eq!(t.lines().count(), 3);
        assert!(t.starts_with("k  lambda"));
    }
}
