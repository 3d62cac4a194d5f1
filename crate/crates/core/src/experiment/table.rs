//! Fixed-format CSV tables.

use std::path::Path;

use crate::error::{Error, Result};

/// 12 significant digits; scientific below 1e-4 (and at or above 1e12).
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = v.abs();
    if !(1e-4..1e12).contains(&a) {
        return format!("{v:.11e}");
    }
    let exp = a.log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Missing,
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Missing => String::new(),
            Cell::Text(t) => t.clone(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let records = std::iter::once(self.header.clone()).chain(self.rows.iter().map(|r| r.iter().map(Cell::render).collect()));
        for rec in records {
            w.write_record(&rec).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Reads one numeric column from a CSV with a header row. Empty cells are
/// rejected.
pub fn read_column(text: &str, name: &str) -> Result<Vec<f64>> {
    let bad = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let idx = r
        .headers()
        .map_err(bad)?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Invalid(format!("csv has no column '{name}'")))?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(bad)?;
            let cell = rec.get(idx).unwrap_or("");
            cell.parse::<f64>()
                .map_err(|_| Error::Invalid(format!("row {}: column '{name}' value '{cell}' is not a number", i + 2)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.0), "1.00000000000");
        assert_eq!(format_float(0.5), "0.500000000000");
        assert_eq!(format_float(-123.456), "-123.456000000");
        assert_eq!(format_float(2.5e-5), "2.50000000000e-5");
        assert_eq!(format_float(1e-4), "0.000100000000000");
        assert_eq!(format_float(3e13), "3.00000000000e13");
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["m", "p", "q"]);
        t.push(vec![1usize.into(), 0.25.into(), None.into()]);
        t.push(vec![2usize.into(), 1e-7.into(), Some(3.0).into()]);
        let text = t.to_csv();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_column(&text, "p").unwrap(), vec![0.25, 1e-7]);
        assert_eq!(read_column(&text, "m").unwrap(), vec![1.0, 2.0]);
        assert!(read_column(&text, "q").is_err());
        assert!(read_column(&text, "zz").is_err());
    }
}
