use std::collections::BTreeMap;

use cmut::sweep::{format_sig6, Table};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_sig6(*v),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // same precision as the CSV form
            Cell::Num(v) => format_sig6(*v).parse::<f64>().map_or(Value::Null, |x| json!(x)),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

/// Tabular command output with `#` metadata, rendered as CSV or JSON.
#[derive(Debug, Clone, Default)]
pub struct Output {
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Output {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> &mut Self {
        self.rows.push(cells);
        self
    }

    pub fn from_table(t: &Table) -> Self {
        let mut out = Output {
            metadata: t.metadata.clone(),
            ..Output::default()
        };
        out.columns.push(format!("{}({})", t.param.name, t.param.unit.symbol()));
        out.columns
            .extend(t.columns.iter().map(|c| format!("{}({})", c.name, c.unit.symbol())));
        out.columns.push("flags".into());
        for r in &t.rows {
            let mut cells = vec![Cell::Num(t.param.unit.to_display(r.param))];
            for (c, v) in t.columns.iter().zip(&r.values) {
                cells.push(v.map(|v| c.unit.to_display(v)).into());
            }
            cells.push(Cell::Text(r.flags.join(";")));
            out.rows.push(cells);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            for (i, line) in v.lines().enumerate() {
                if i == 0 {
                    s.push_str(&format!("# {k}: {line}\n"));
                } else {
                    s.push_str(&format!("#   {line}\n"));
                }
            }
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| {
                        let v = match (c.as_str(), v) {
                            ("flags", Cell::Text(s)) if s.is_empty() => json!([]),
                            ("flags", Cell::Text(s)) => json!(s.split(';').collect::<Vec<_>>()),
                            _ => v.json(),
                        };
                        (c.clone(), v)
                    })
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = json!({
            "metadata": self.metadata,
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json value serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json() {
        let mut o = Output::new(&["quantity", "value", "unit"]);
        o.meta("artifact", "x");
        o.row(vec!["total".into(), 4.60861234e-5.into(), "nF".into()]);
        o.row(vec!["missing".into(), None.into(), "nF".into()]);
        assert_eq!(
            o.to_csv(),
            "# artifact: x\nquantity,value,unit\ntotal,4.60861e-5,nF\nmissing,,nF\n"
        );
        let v: Value = serde_json::from_str(&o.to_json()).unwrap();
        assert_eq!(v["rows"][0]["value"], json!(4.60861e-5));
        assert_eq!(v["rows"][1]["value"], Value::Null);
    }
}
