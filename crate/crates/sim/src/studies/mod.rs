//! The scripted experiments. Every study takes its parameters and a seed,
//! returns a report, and can write that report as CSV tables.

pub mod density1d;
pub mod density2d;
pub mod highdim;
pub mod prior_cdf;
pub mod quantreg;
pub mod table1;

use std::path::Path;

use serde_json::Value;

use crate::output::Table;
use crate::SimResult;

/// Named tables of a study plus the metadata written in their headers.
pub trait Report {
    fn meta(&self) -> Value;
    fn tables(&self) -> Vec<(&'static str, Table)>;

    /// Writes `<dir>/<name>.csv` for every table; returns the paths.
    fn write(&self, dir: &Path) -> SimResult<Vec<std::path::PathBuf>> {
        let meta = self.meta();
        self.tables()
            .into_iter()
            .map(|(name, table)| {
                let path = dir.join(format!("{name}.csv"));
                table.write(&path, &meta)?;
                Ok(path)
            })
            .collect()
    }
}
