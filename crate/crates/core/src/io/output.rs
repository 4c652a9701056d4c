//! Tabular and report output.
//!
//! Floats are written in Rust's shortest round-trip form, so identical inputs
//! give byte-identical files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::meanfield::FlowSample;

/// Units line shared by every table.
pub const UNITS: &str = "angles rad; frequencies rad/s (angular); time s; spin components in units of hbar";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Named numeric table with a fixed column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub units: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            units: UNITS.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// `# units: …` comment, header row, then data.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# units: {}", self.units);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Pretty JSON with a trailing newline. NaN and infinities become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

pub const FLOW_COLUMNS: [&str; 10] =
    ["theta_i", "phi_i", "jx_i", "jy_i", "jz_i", "tx", "ty", "tz", "dtheta", "dphi"];

pub fn flow_table(name: &str, samples: &[FlowSample]) -> Table {
    let mut t = Table::new(name, &FLOW_COLUMNS);
    for s in samples {
        t.push(vec![
            s.theta_i,
            s.phi_i,
            s.j_initial.x,
            s.j_initial.y,
            s.j_initial.z,
            s.torque.x,
            s.torque.y,
            s.torque.z,
            s.dtheta,
            s.dphi,
        ]);
    }
    t
}

/// File produced by a command or scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file_name: String,
    pub content: String,
}

impl Artifact {
    pub fn table(table: &Table, format: Format) -> Self {
        Self { file_name: format!("{}.{}", table.name, format.extension()), content: table.render(format) }
    }

    pub fn report<T: Serialize + ?Sized>(name: &str, value: &T) -> Self {
        Self { file_name: format!("{name}.json"), content: to_json(value) }
    }
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn write_artifacts(dir: &std::path::Path, artifacts: &[Artifact]) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.file_name);
            std::fs::write(&path, &a.content)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![0.1, -2.0]);
        t.push(vec![1e-20, 3.0]);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# units: angles rad"));
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines[2], "0.1,-2");
        let back: Vec<f64> = lines[3].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(back, vec![1e-20, 3.0]);
    }

    #[test]
    fn json_round_trip() {
        let mut t = Table::new("demo", &["x"]);
        t.push(vec![std::f64::consts::PI]);
        let back: Table = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.column("x"), Some(vec![std::f64::consts::PI]));
        assert_eq!(t.column("y"), None);
    }
}
