//! CSV tables shared by sweep output and reference fixtures.
//!
//! ```text
//! # key: value
//! cavity_radius(um),capacitance(nF),flags
//! 22,4.6086e-5,
//! ```
//!
//! Values are written in the boundary units (um, V, nF, MHz) with six
//! significant digits; [`Table`] holds them in SI.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{CmutError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Unit {
    #[serde(rename = "um")]
    Micrometre,
    #[serde(rename = "V")]
    Volt,
    #[serde(rename = "nF")]
    Nanofarad,
    #[serde(rename = "MHz")]
    Megahertz,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Micrometre => "um",
            Unit::Volt => "V",
            Unit::Nanofarad => "nF",
            Unit::Megahertz => "MHz",
        }
    }

    /// SI value of one display unit.
    pub fn si_scale(self) -> f64 {
        match self {
            Unit::Micrometre => 1e-6,
            Unit::Volt => 1.0,
            Unit::Nanofarad => 1e-9,
            Unit::Megahertz => 1e6,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "um" | "μm" => Some(Unit::Micrometre),
            "V" => Some(Unit::Volt),
            "nF" => Some(Unit::Nanofarad),
            "MHz" => Some(Unit::Megahertz),
            _ => None,
        }
    }

    pub fn to_display(self, si: f64) -> f64 {
        si / self.si_scale()
    }

    pub fn to_si(self, display: f64) -> f64 {
        display * self.si_scale()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: Unit,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: Unit) -> Self {
        Self {
            name: name.into(),
            unit,
        }
    }

    fn header(&self) -> String {
        format!("{}({})", self.name, self.unit.symbol())
    }

    fn parse_header(cell: &str) -> Option<Self> {
        let cell = cell.trim();
        let open = cell.rfind('(')?;
        let unit = cell.strip_suffix(')')?.get(open + 1..)?;
        Some(Self::new(&cell[..open], Unit::parse(unit)?))
    }
}

/// One grid point. Values are SI; `None` when the point could not be
/// evaluated (see `flags`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub param: f64,
    pub values: Vec<Option<f64>>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub param: Column,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub metadata: BTreeMap<String, String>,
}

/// Six significant digits, plain notation for moderate magnitudes.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{exp}");
    }
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let point = exp + 1; // digits before the decimal point
    let mut out = String::new();
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-point) as usize));
        out.push_str(&digits);
    } else {
        let p = point as usize;
        if p >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', p - digits.len()));
        } else {
            out.push_str(&digits[..p]);
            out.push('.');
            out.push_str(&digits[p..]);
        }
    }
    if out.contains('.') {
        out = out.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if negative {
        out.insert(0, '-');
    }
    out
}

impl Table {
    pub fn new(param: Column, columns: Vec<Column>) -> Self {
        Self {
            param,
            columns,
            rows: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Values of one column, SI; `None` for missing cells.
    pub fn column_values(&self, idx: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.values.get(idx).copied().flatten()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            for (i, line) in v.lines().enumerate() {
                if i == 0 {
                    out.push_str(&format!("# {k}: {line}\n"));
                } else {
                    out.push_str(&format!("#   {line}\n"));
                }
            }
        }
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec![self.param.header()];
        header.extend(self.columns.iter().map(Column::header));
        header.push("flags".into());
        wtr.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![format_sig6(self.param.unit.to_display(row.param))];
            for (col, v) in self.columns.iter().zip(&row.values) {
                rec.push(v.map(|v| format_sig6(col.unit.to_display(v))).unwrap_or_default());
            }
            rec.push(row.flags.join(";"));
            wtr.write_record(&rec).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(wtr.into_inner().expect("flush")).expect("utf-8 csv"));
        out
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| CmutError::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut metadata = BTreeMap::new();
        let mut last_key: Option<String> = None;
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = &line[1..];
            if let Some(cont) = body.strip_prefix("   ") {
                if let Some(k) = &last_key {
                    let v: &mut String = metadata.get_mut(k).expect("key inserted");
                    v.push('\n');
                    v.push_str(cont);
                }
            } else if let Some((k, v)) = body.trim_start().split_once(": ") {
                metadata.insert(k.to_string(), v.to_string());
                last_key = Some(k.to_string());
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| err(0, e.to_string()))?.clone();
        let header_line = headers.position().map_or(0, |p| p.line() as usize);
        let mut cells: Vec<&str> = headers.iter().collect();
        let has_flags = cells.last() == Some(&"flags");
        if has_flags {
            cells.pop();
        }
        if cells.len() < 2 {
            return Err(err(
                header_line,
                "need a parameter column and at least one response column".into(),
            ));
        }
        let parse_col = |c: &str| {
            Column::parse_header(c).ok_or_else(|| err(header_line, format!("header `{c}` is not `name(unit)`")))
        };
        let param = parse_col(cells[0])?;
        let columns = cells[1..].iter().map(|c| parse_col(c)).collect::<Result<Vec<_>>>()?;
        let mut table = Table::new(param, columns);
        table.metadata = metadata;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let n = table.columns.len();
            if rec.len() < n + 1 || rec.len() > n + 2 {
                return Err(err(
                    line,
                    format!(
                        "expected {} fields, found {}",
                        n + 1 + usize::from(has_flags),
                        rec.len()
                    ),
                ));
            }
            let num = |field: &str, s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| err(line, format!("field `{field}`: `{s}` is not a number")))
            };
            let param = table.param.unit.to_si(num(&table.param.name, &rec[0])?);
            let mut values = Vec::with_capacity(n);
            for (i, col) in table.columns.iter().enumerate() {
                let s = &rec[i + 1];
                values.push(if s.is_empty() {
                    None
                } else {
                    Some(col.unit.to_si(num(&col.name, s)?))
                });
            }
            let flags = rec
                .get(n + 1)
                .filter(|s| !s.is_empty())
                .map(|s| s.split(';').map(str::to_string).collect())
                .unwrap_or_default();
            table.rows.push(Row { param, values, flags });
        }
        Ok(table)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CmutError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(22.0), "22");
        assert_eq!(format_sig6(0.0125), "0.0125");
        assert_eq!(format_sig6(4.6086e-5), "4.6086e-5");
        assert_eq!(format_sig6(5.197272532), "5.19727");
        assert_eq!(format_sig6(9.9999996), "10");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(-0.3), "-0.3");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1e-4), "0.0001");
    }

    fn sample() -> Table {
        let mut t = Table::new(
            Column::new("cavity_radius", Unit::Micrometre),
            vec![Column::new("capacitance", Unit::Nanofarad)],
        );
        t.metadata.insert("response".into(), "capacitance".into());
        t.metadata.insert("note".into(), "first\nsecond".into());
        t.rows.push(Row {
            param: 22e-6,
            values: vec![Some(4.6086e-14)],
            flags: vec![],
        });
        t.rows.push(Row {
            param: 27e-6,
            values: vec![None],
            flags: vec!["invalid_geometry".into(), "other".into()],
        });
        t
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        let expected = "# note: first\n#   second\n# response: capacitance\n\
                        cavity_radius(um),capacitance(nF),flags\n\
                        22,4.6086e-5,\n27,,invalid_geometry;other\n";
        assert_eq!(csv, expected);
    }

    #[test]
    fn csv_parse() {
        let t = Table::from_csv(&sample().to_csv(), Path::new("x.csv")).unwrap();
        assert_eq!(t.metadata["note"], "first\nsecond");
        assert_eq!(t.rows.len(), 2);
        assert!((t.rows[0].values[0].unwrap() - 4.6086e-14).abs() < 1e-27);
        assert_eq!(t.rows[1].values[0], None);
        assert_eq!(t.rows[1].flags, vec!["invalid_geometry", "other"]);
        assert_eq!(t.to_csv(), sample().to_csv());
    }

    #[test]
    fn csv_without_flags_column() {
        let t = Table::from_csv("x(V),y(um)\n40,0.0125\n", Path::new("f.csv")).unwrap();
        assert_eq!(t.rows[0].param, 40.0);
        assert!((t.rows[0].values[0].unwrap() - 0.0125e-6).abs() < 1e-20);
    }

    #[test]
    fn csv_errors_name_line_and_field() {
        let e = Table::from_csv("# c\nx(V),y(um)\n40,abc\n", Path::new("f.csv")).unwrap_err();
        match e {
            CmutError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("`y`"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(Table::from_csv("x,y\n1,2\n", Path::new("f.csv")).is_err());
        assert!(Table::from_csv("x(V),y(furlong)\n1,2\n", Path::new("f.csv")).is_err());
    }

    proptest! {
        #[test]
        fn emitted_values_round_trip(vals in proptest::collection::vec(1e-3f64..1e3, 1..8)) {
            let mut t = Table::new(Column::new("voltage", Unit::Volt), vec![Column::new("center_displacement", Unit::Micrometre)]);
            for (i, v) in vals.iter().enumerate() {
                t.rows.push(Row { param: i as f64, values: vec![Some(v * 1e-6)], flags: vec![] });
            }
            let csv = t.to_csv();
            let parsed = Table::from_csv(&csv, Path::new("p.csv")).unwrap();
            prop_assert_eq!(parsed.to_csv(), csv);
            for (row, v) in parsed.rows.iter().zip(&vals) {
                let printed: f64 = format_sig6(*v).parse().unwrap();
                prop_assert_eq!(format_sig6(row.values[0].unwrap() / 1e-6), format_sig6(printed));
            }
        }
    }
}
