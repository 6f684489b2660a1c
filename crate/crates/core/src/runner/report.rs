use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::Error;

/// One verified identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub identity: String,
    pub anchor: String,
    pub tolerance: f64,
    /// `None` when the computation failed or produced a non-finite value.
    pub residual: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `residual ≤ tolerance`.
    pub fn measured(suite: &str, identity: &str, anchor: &str, tolerance: f64, residual: f64) -> Self {
        let finite = residual.is_finite();
        Self {
            suite: suite.into(),
            identity: identity.into(),
            anchor: anchor.into(),
            tolerance,
            residual: finite.then_some(residual),
            pass: finite && residual <= tolerance,
            note: (!finite).then(|| "non-finite residual".into()),
        }
    }

    pub fn failed(suite: &str, identity: &str, anchor: &str, tolerance: f64, err: &Error) -> Self {
        Self {
            suite: suite.into(),
            identity: identity.into(),
            anchor: anchor.into(),
            tolerance,
            residual: None,
            pass: false,
            note: Some(err.to_string()),
        }
    }

    /// Appends to the note, keeping any error message already there.
    pub fn add_note(&mut self, note: impl Into<String>) {
        let note = note.into();
        self.note = Some(match self.note.take() {
            Some(prev) => format!("{prev}; {note}"),
            None => note,
        });
    }
}

/// CSV text with a header row, `.` decimals and `\n` line ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub csv: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), csv: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.csv, "{}", cells.join(","));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub group: String,
    pub config: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub version: String,
    pub seed: u64,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }
}
