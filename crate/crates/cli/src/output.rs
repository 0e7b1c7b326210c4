//! Text tables and CSV. Numbers in CSV carry 17 significant digits so every
//! double reparses to the same bits.

use std::fmt::{self, Display, Write as _};
use std::path::Path;

use crate::error::CliError;

pub fn fmt_csv(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_string(header: &[String], rows: &[Vec<f64>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_csv(x))).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of numbers is ASCII"))
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    std::fs::write(path, csv_string(header, rows)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Table cell text. Floats use the shortest round-trip form, switching to
/// exponent notation outside `[1e-4, 1e15)`.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        let a = self.abs();
        if *self == 0.0 || (1e-4..1e15).contains(&a) || !self.is_finite() {
            format!("{self}")
        } else {
            format!("{self:e}")
        }
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_cell!(usize, bool, &str, String);

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

/// `[a, b, c]`.
pub fn list<T: Cell>(v: impl IntoIterator<Item = T>) -> String {
    let items: Vec<String> = v.into_iter().map(|x| x.cell()).collect();
    format!("[{}]", items.join(", "))
}

/// Two-column `key  value` table.
#[derive(Default)]
pub struct Table(Vec<(String, String)>);

impl Table {
    pub fn row(&mut self, key: &str, value: impl Cell) -> &mut Self {
        self.0.push((key.to_string(), value.cell()));
        self
    }
}

impl Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.0.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.0 {
            writeln!(out, "{k:<width$}  {v}")?;
        }
        f.write_str(&out)
    }
}
