//! CSV artifacts: a `#` line with the config hash, a header row, then data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// 12 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// An in-memory table written once all rows are known.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of a numeric column; unparsable cells become NaN.
    pub fn values(&self, name: &str) -> Vec<f64> {
        match self.column(name) {
            Some(c) => self.rows.iter().map(|r| r[c].parse().unwrap_or(f64::NAN)).collect(),
            None => Vec::new(),
        }
    }

    pub fn write_to(&self, w: impl Write, config_hash: &str) -> std::io::Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "# config-sha256: {config_hash}")?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.header)?;
        for row in &self.rows {
            csv.write_record(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Writes `<dir>/<name>.csv` and returns the path.
    pub fn save(&self, dir: &Path, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(format!("{}.csv", self.name));
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.write_to(file, &config.hash()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn layout() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![num(0.5), "x".into()]);
        let mut buf = Vec::new();
        t.write_to(&mut buf, "abc").unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# config-sha256: abc\na,b\n5.00000000000e-1,x\n");
        assert_eq!(t.values("a"), vec![0.5]);
        assert!(t.values("b")[0].is_nan());
    }
}
