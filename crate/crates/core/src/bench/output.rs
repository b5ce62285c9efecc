use std::fs;
use std::path::{Path, PathBuf};

use super::Experiment;
use crate::error::{Error, Result};

pub const SCHEMA_LINE: &str = "# scalestat-schema v1";

/// A CSV table held in memory. Cells are formatted when pushed.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let body = String::from_utf8(body).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(format!("{SCHEMA_LINE}\n{body}"))
    }
}

/// Results of one experiment. `results` depends only on the configuration
/// and seed; wallclock measurements live in `timing`.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub experiment: Experiment,
    pub results: Table,
    pub timing: Table,
}

impl ExperimentOutput {
    /// Writes `<experiment>.csv` and `<experiment>.timing.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let main = dir.join(format!("{}.csv", self.experiment));
        let timing = dir.join(format!("{}.timing.csv", self.experiment));
        fs::write(&main, self.results.to_csv()?)?;
        fs::write(&timing, self.timing.to_csv()?)?;
        Ok((main, timing))
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}
