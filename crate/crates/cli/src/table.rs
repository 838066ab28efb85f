//! Aligned text tables and CSV output.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

#[derive(Debug, Clone)]
pub struct Table {
    /// Printed above the table; carries the parameters behind the rows.
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, headers: &[&str]) -> Self {
        Self {
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.aligned(),
            Format::Csv => format!("# {}\n{}", self.title, self.csv()),
        }
    }

    fn aligned(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let pad = w - cell.chars().count();
                // numbers right, text left
                if cell.parse::<f64>().is_ok() {
                    s.extend(std::iter::repeat_n(' ', pad));
                    s.push_str(cell);
                } else {
                    s.push_str(cell);
                    s.extend(std::iter::repeat_n(' ', pad));
                }
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        writeln!(out, "{}", self.title).unwrap();
        writeln!(out, "{}", line(&self.headers)).unwrap();
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        writeln!(out, "{}", line(&rule)).unwrap();
        for row in &self.rows {
            writeln!(out, "{}", line(row)).unwrap();
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv()).with_context(|| format!("writing {}", path.display()))
    }
}

/// Bit counts in bits, kbits or Mbits with three significant figures.
pub fn fmt_bits(bits: u64) -> String {
    let mut v = bits as f64;
    if v < 1e3 {
        return format!("{bits} bits");
    }
    let mut unit = "kbits";
    v /= 1e3;
    if round3(v) >= 1e3 {
        unit = "Mbits";
        v /= 1e3;
    }
    let v = round3(v);
    let decimals = if v >= 100.0 {
        0
    } else if v >= 10.0 {
        1
    } else {
        2
    };
    format!("{v:.decimals$} {unit}")
}

fn round3(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(2 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}

/// Probabilities and rates in short scientific notation.
pub fn fmt_prob(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else {
        format!("{p:.3e}")
    }
}

pub fn pass_fail(pass: bool) -> String {
    if pass { "pass" } else { "FAIL" }.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_three_figures() {
        assert_eq!(fmt_bits(672), "672 bits");
        assert_eq!(fmt_bits(29_792), "29.8 kbits");
        assert_eq!(fmt_bits(1_000), "1.00 kbits");
        assert_eq!(fmt_bits(999_600), "1.00 Mbits");
        assert_eq!(fmt_bits(2_104_000), "2.10 Mbits");
        assert_eq!(fmt_bits(123_456_789), "123 Mbits");
    }

    #[test]
    fn aligned_and_csv() {
        let mut t = Table::new("demo n=2", &["name", "value"]);
        t.push(vec!["alpha".into(), "1".into()]);
        t.push(vec!["b".into(), "22.5".into()]);
        assert_eq!(
            t.render(Format::Table),
            "demo n=2\nname   value\n-----  -----\nalpha      1\nb       22.5\n"
        );
        assert_eq!(
            t.render(Format::Csv),
            "# demo n=2\nname,value\nalpha,1\nb,22.5\n"
        );
    }
}
