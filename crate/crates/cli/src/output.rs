//! CSV assembly and file writing. Floats carry 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use spinfilter::ensemble::format_float;
use spinfilter::sde::Trajectory;
use spinfilter::{Metric, SpinOperators};

use crate::{CliError, CliResult};

/// Column-oriented table rendered as CSV with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn push(&mut self, header: impl Into<String>, column: Vec<f64>) {
        debug_assert!(self.columns.first().is_none_or(|c| c.len() == column.len()));
        self.headers.push(header.into());
        self.columns.push(column);
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| format_float(c[r])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `t, wiener, observation` followed by the requested metric channels.
pub fn trajectory_table(traj: &Trajectory, metrics: &[Metric], ops: &SpinOperators, target: usize) -> CliResult<Table> {
    let mut table = Table::default();
    table.push("t", traj.times.clone());
    table.push("wiener", traj.wiener.clone());
    table.push("observation", traj.observation.clone());
    for &m in metrics {
        table.push(m.name(), traj.metric_series(m, ops, target)?);
    }
    Ok(table)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
