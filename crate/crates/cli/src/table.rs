//! Typed output tables rendered to CSV or JSON.
//!
//! Floats are serialized with 17 significant digits in CSV and through
//! serde_json's shortest round-trip form in JSON, so both renderings parse
//! back to identical values.

use serde_json::{json, Value};

/// One table cell; `Null` renders as an empty CSV field and JSON `null`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Null,
}

impl Cell {
    pub fn str(s: impl Into<String>) -> Self {
        Cell::Str(s.into())
    }

    fn to_csv_field(&self) -> String {
        match self {
            Cell::Str(s) => csv_escape(s),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn to_json_value(&self) -> Value {
        match self {
            Cell::Str(s) => json!(s),
            Cell::Int(v) => json!(v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map(Value::Number).unwrap_or(Value::Null),
            Cell::Bool(b) => json!(b),
            Cell::Null => Value::Null,
        }
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Ordered columns plus typed rows; every row has one cell per column.
#[derive(Debug, Clone)]
pub struct OutputTable {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

/// Rendering target for a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl OutputTable {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(Cell::to_csv_field).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out.into_bytes()
    }

    fn render_json(&self) -> Vec<u8> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| Value::Array(row.iter().map(Cell::to_json_value).collect()))
            .collect();
        let doc = json!({ "columns": self.columns, "rows": rows });
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("table serializes");
        bytes.push(b'\n');
        bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_only_when_needed() {
        assert_eq!(csv_escape("plain"), "plain");
        assert_eq!(csv_escape("a,b"), "\"a,b\"");
        assert_eq!(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn float_fields_round_trip_through_csv() {
        let mut table = OutputTable::new(vec!["x"]);
        let value = 0.1f64 + 0.2f64;
        table.push_row(vec![Cell::Float(value)]);
        let csv = String::from_utf8(table.render(Format::Csv)).unwrap();
        let field = csv.lines().nth(1).unwrap();
        assert_eq!(field.parse::<f64>().unwrap(), value);
    }

    #[test]
    fn json_and_csv_agree_after_parsing() {
        let mut table = OutputTable::new(vec!["name", "count", "value", "ok", "blank"]);
        table.push_row(vec![
            Cell::str("row"),
            Cell::Int(-3),
            Cell::Float(1.5e-300),
            Cell::Bool(true),
            Cell::Null,
        ]);
        let csv = String::from_utf8(table.render(Format::Csv)).unwrap();
        let json: Value = serde_json::from_slice(&table.render(Format::Json)).unwrap();
        let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        let row = &json["rows"][0];
        assert_eq!(fields[0], row[0].as_str().unwrap());
        assert_eq!(fields[1].parse::<i64>().unwrap(), row[1].as_i64().unwrap());
        assert_eq!(fields[2].parse::<f64>().unwrap(), row[2].as_f64().unwrap());
        assert_eq!(fields[3].parse::<bool>().unwrap(), row[3].as_bool().unwrap());
        assert!(fields[4].is_empty() && row[4].is_null());
    }
}
