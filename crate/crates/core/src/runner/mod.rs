//! Verification suites behind the command-line tool: configuration parsing,
//! suite execution and report files.

pub mod config;
mod heisenberg;
mod motion;
pub mod report;
mod step2;

use std::fs;
use std::path::Path;
use std::time::Instant;

pub use config::{parse_config, ConfigError, Group, RunConfig, Suite};
pub use report::{Artifact, Check, Report};

use crate::{Error, Result};

/// Result of [`run`]: the report, its CSV artifacts and the wall time, which
/// stays out of `report.json` so that the report is reproducible.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub artifacts: Vec<Artifact>,
    pub wall_seconds: f64,
}

/// Collects the checks and artifacts of one suite.
pub(crate) struct Sink {
    suite: &'static str,
    checks: Vec<Check>,
    artifacts: Vec<Artifact>,
}

impl Sink {
    fn new(suite: Suite) -> Self {
        Self { suite: suite.name(), checks: Vec::new(), artifacts: Vec::new() }
    }

    /// Records `residual ≤ tolerance`, or a failed check when the
    /// computation itself errors.
    fn measure(&mut self, identity: &str, anchor: &str, tolerance: f64, residual: Result<f64>) -> &mut Check {
        let check = match residual {
            Ok(r) => Check::measured(self.suite, identity, anchor, tolerance, r),
            Err(e) => Check::failed(self.suite, identity, anchor, tolerance, &e),
        };
        self.checks.push(check);
        self.checks.last_mut().expect("just pushed")
    }

    /// Records a count of violations, which passes only at zero.
    fn count(&mut self, identity: &str, anchor: &str, violations: Result<usize>) -> &mut Check {
        self.measure(identity, anchor, 0.0, violations.map(|v| v as f64))
    }

    fn artifact(&mut self, artifact: Artifact) {
        self.artifacts.push(artifact);
    }
}

pub(crate) fn fmt_real(x: f64) -> String {
    format!("{x:e}")
}

/// Executes every suite selected by `config`. Configuration problems are
/// returned as errors; numerical failures become failed checks.
pub fn run(config: &RunConfig) -> std::result::Result<RunOutput, ConfigError> {
    config.validate()?;
    let algebras = match config.group {
        Group::Step2 => Some(step2::load_algebras(config)?),
        _ => None,
    };
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();
    for suite in config.suites() {
        let mut sink = Sink::new(suite);
        let outcome = match config.group {
            Group::Heisenberg => heisenberg::run_suite(suite, config, &mut sink),
            Group::Motion => motion::run_suite(suite, config, &mut sink),
            Group::Step2 => step2::run_suite(suite, config, algebras.as_ref().expect("loaded above"), &mut sink),
        };
        if let Err(e) = outcome {
            sink.checks.push(Check::failed(suite.name(), "suite setup", "configuration", 0.0, &e));
        }
        checks.append(&mut sink.checks);
        artifacts.append(&mut sink.artifacts);
    }
    let report = Report {
        suite: config.suite.name().into(),
        group: config.group.name().into(),
        config: config.echo(),
        checks,
        artifacts: artifacts.iter().map(|a| a.name.clone()).collect(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
    };
    Ok(RunOutput { report, artifacts, wall_seconds: start.elapsed().as_secs_f64() })
}

/// Writes `report.json`, the CSV artifacts and `timing.json` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), out.report.to_json())?;
    for a in &out.artifacts {
        fs::write(dir.join(&a.name), &a.csv)?;
    }
    let timing = serde_json::json!({ "wall_seconds": out.wall_seconds });
    let text = serde_json::to_string_pretty(&timing).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("timing.json"), text + "\n")?;
    Ok(())
}

/// Pool of `p` items whose unordered pairs `(k, l)`, `k ≤ l`, number at
/// least `trials`; returns `p` and the first `trials` pairs.
pub(crate) fn pair_pool(trials: usize) -> (usize, Vec<(usize, usize)>) {
    let mut p = 1;
    while p * (p + 1) / 2 < trials {
        p += 1;
    }
    let pairs = (0..p).flat_map(|k| (k..p).map(move |l| (k, l))).take(trials).collect();
    (p, pairs)
}
