//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting,
//! so files are exact and byte-stable across runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// One CSV table: a header row and string cells.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest string that parses back to the same `f64`; exponent notation
/// outside `[1e-4, 1e15)` in magnitude.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// `x` rounded to nine significant digits, in plain decimal notation when
/// that stays readable.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..9).contains(&magnitude) {
        format!("{:.*}", (8 - magnitude) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn num_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(
            sig9(std::f64::consts::PI * std::f64::consts::PI / 2.0),
            "4.93480220"
        );
        assert_eq!(sig9(-0.5), "-0.500000000");
        assert_eq!(sig9(1234.5678912), "1234.56789");
        assert_eq!(sig9(1.0e-7), "1.00000000e-7");
        assert_eq!(sig9(0.0), "0");
    }

    #[test]
    fn round_trip_floats() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 2.0611e-7, -0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(2.5e-7), "2.5e-7");
        assert_eq!(num(-1.0), "-1");
    }

    #[test]
    fn table_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(1.5), num(f64::NAN)]);
        t.write(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n1.5,NaN\n");
    }
}
