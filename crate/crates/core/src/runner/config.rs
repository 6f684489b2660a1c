//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Plancherel,
    Ortho,
    Intertwine,
    ProductLaw,
    Symplectic,
    Inversion,
    RankProfile,
    KernelSupport,
    Pocs,
    All,
}

impl Suite {
    /// Every concrete suite, in report order.
    pub const CONCRETE: [Suite; 9] = [
        Suite::Plancherel,
        Suite::Ortho,
        Suite::Intertwine,
        Suite::ProductLaw,
        Suite::Symplectic,
        Suite::Inversion,
        Suite::RankProfile,
        Suite::KernelSupport,
        Suite::Pocs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Plancherel => "plancherel",
            Suite::Ortho => "ortho",
            Suite::Intertwine => "intertwine",
            Suite::ProductLaw => "product-law",
            Suite::Symplectic => "symplectic",
            Suite::Inversion => "inversion",
            Suite::RankProfile => "rank-profile",
            Suite::KernelSupport => "kernel-support",
            Suite::Pocs => "pocs",
            Suite::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::CONCRETE.into_iter().chain([Suite::All]).find(|x| x.name() == s)
    }

    /// Groups the suite runs on.
    pub fn groups(&self) -> &'static [Group] {
        use Group::*;
        match self {
            Suite::Plancherel | Suite::Ortho | Suite::ProductLaw | Suite::Inversion => &[Heisenberg, Motion, Step2],
            Suite::Intertwine => &[Motion],
            Suite::Symplectic => &[Step2],
            Suite::RankProfile | Suite::KernelSupport | Suite::Pocs => &[Heisenberg],
            Suite::All => &[Heisenberg, Motion, Step2],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Group {
    Heisenberg,
    Motion,
    Step2,
}

impl Group {
    pub fn name(&self) -> &'static str {
        match self {
            Group::Heisenberg => "heisenberg",
            Group::Motion => "motion",
            Group::Step2 => "step2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Group::Heisenberg, Group::Motion, Group::Step2].into_iter().find(|g| g.name() == s)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("configuration has no settings")]
    Empty,
}

/// Keys left unset are resolved per group, suite and algebra when the
/// suite runs; the report echoes them as `auto`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub suite: Suite,
    pub group: Group,
    pub n: Option<usize>,
    pub lambda: f64,
    pub degree_cap: Option<usize>,
    pub quad_size: Option<usize>,
    pub half_width: Option<f64>,
    pub points: Option<usize>,
    pub m_char: Option<usize>,
    pub theta_points: Option<usize>,
    pub epsilon: f64,
    pub seed: u64,
    pub iterations: usize,
    pub rank_cap: usize,
    pub algebra_file: Option<String>,
    pub output_dir: String,
    pub omega: Option<Vec<f64>>,
    pub trials: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            suite: Suite::Plancherel,
            group: Group::Heisenberg,
            n: None,
            lambda: 1.0,
            degree_cap: None,
            quad_size: None,
            half_width: None,
            points: None,
            m_char: None,
            theta_points: None,
            epsilon: 1e-8,
            seed: 42,
            iterations: 200,
            rank_cap: 1,
            algebra_file: None,
            output_dir: "hermweyl-out".into(),
            omega: None,
            trials: None,
        }
    }
}

pub const KEYS: [&str; 18] = [
    "suite",
    "group",
    "n",
    "lambda",
    "degree_cap",
    "quad_size",
    "L",
    "M",
    "M_char",
    "T",
    "epsilon",
    "seed",
    "iterations",
    "rank_cap",
    "algebra_file",
    "output_dir",
    "omega",
    "trials",
];

fn parse_count(v: &str, lo: usize, hi: usize) -> Result<usize, String> {
    let x: usize = v.parse().map_err(|_| format!("expected an integer in {lo}..={hi}, found `{v}`"))?;
    if x < lo || x > hi {
        return Err(format!("{x} outside {lo}..={hi}"));
    }
    Ok(x)
}

fn parse_real(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a real number, found `{v}`"))?;
    if !x.is_finite() {
        return Err(format!("{v} is not finite"));
    }
    Ok(x)
}

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
/// keys, malformed values and out-of-range values are errors naming the line.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |msg: String| ConfigError::Line { line, msg };
        let (key, value) = body.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if let Some(prev) = seen.insert(key.to_string(), line) {
            return Err(err(format!("duplicate key `{key}` (first set on line {prev})")));
        }
        if value.is_empty() {
            return Err(err(format!("key `{key}` has no value")));
        }
        let bad = |msg: String| ConfigError::Line { line, msg: format!("{key}: {msg}") };
        match key {
            "suite" => cfg.suite = Suite::parse(value).ok_or_else(|| bad(format!("unknown suite `{value}`")))?,
            "group" => cfg.group = Group::parse(value).ok_or_else(|| bad(format!("unknown group `{value}`")))?,
            "n" => cfg.n = Some(parse_count(value, 1, 2).map_err(bad)?),
            "lambda" => {
                let x = parse_real(value).map_err(bad)?;
                if x == 0.0 {
                    return Err(bad("λ must be a nonzero real number".into()));
                }
                cfg.lambda = x;
            }
            "degree_cap" => cfg.degree_cap = Some(parse_count(value, 1, 64).map_err(bad)?),
            "quad_size" => cfg.quad_size = Some(parse_count(value, 1, 1024).map_err(bad)?),
            "L" => {
                let x = parse_real(value).map_err(bad)?;
                if x <= 0.0 {
                    return Err(bad("half-width must be positive".into()));
                }
                cfg.half_width = Some(x);
            }
            "M" => {
                let x = parse_count(value, 8, 4096).map_err(bad)?;
                if x % 2 != 0 {
                    return Err(bad(format!("{x} is odd")));
                }
                cfg.points = Some(x);
            }
            "M_char" => cfg.m_char = Some(parse_count(value, 0, 64).map_err(bad)?),
            "T" => cfg.theta_points = Some(parse_count(value, 4, 1024).map_err(bad)?),
            "epsilon" => {
                let x = parse_real(value).map_err(bad)?;
                if !(x > 0.0 && x < 1.0) {
                    return Err(bad(format!("{x} outside (0, 1)")));
                }
                cfg.epsilon = x;
            }
            "seed" => cfg.seed = value.parse().map_err(|_| bad(format!("expected an unsigned integer, found `{value}`")))?,
            "iterations" => cfg.iterations = parse_count(value, 1, 100_000).map_err(bad)?,
            "rank_cap" => cfg.rank_cap = parse_count(value, 1, 4096).map_err(bad)?,
            "algebra_file" => cfg.algebra_file = Some(value.to_string()),
            "output_dir" => cfg.output_dir = value.to_string(),
            "omega" => {
                let xs: Result<Vec<f64>, String> = value.split(',').map(|t| parse_real(t.trim())).collect();
                cfg.omega = Some(xs.map_err(bad)?);
            }
            "trials" => cfg.trials = Some(parse_count(value, 1, 10_000).map_err(bad)?),
            _ => unreachable!("key list checked above"),
        }
    }
    if seen.is_empty() {
        return Err(ConfigError::Empty);
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Cross-key checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, msg: String| ConfigError::Invalid { key: key.into(), msg };
        if !self.suite.groups().contains(&self.group) {
            return Err(invalid("suite", format!("suite `{}` does not apply to group `{}`", self.suite, self.group)));
        }
        match (self.group, self.n) {
            (Group::Motion, Some(n)) if n != 1 => {
                return Err(invalid("n", "the motion group is implemented for n = 1".into()));
            }
            (Group::Step2, Some(_)) => {
                return Err(invalid("n", "for step2 the number of pairs is fixed by the algebra".into()));
            }
            _ => {}
        }
        if self.group == Group::Heisenberg && self.n == Some(2) {
            let needs_line = [Suite::ProductLaw, Suite::RankProfile, Suite::KernelSupport, Suite::Pocs];
            if needs_line.contains(&self.suite) {
                return Err(invalid("n", format!("suite `{}` runs for n = 1 only", self.suite)));
            }
        }
        if let (Some(q), Some(n)) = (self.quad_size, self.degree_cap) {
            if q < 2 * n + 8 {
                return Err(invalid("quad_size", format!("{q} is below 2·degree_cap + 8 = {}", 2 * n + 8)));
            }
        }
        if let (Some(t), Some(m)) = (self.theta_points, self.m_char) {
            if t < 2 * m + 4 {
                return Err(invalid("T", format!("{t} angles cannot resolve characters up to {m} (need 2·M_char + 4)")));
            }
        }
        if self.omega.is_some() && self.group != Group::Step2 {
            return Err(invalid("omega", "only the step2 group uses omega".into()));
        }
        if self.algebra_file.is_some() && self.group != Group::Step2 {
            return Err(invalid("algebra_file", "only the step2 group uses an algebra".into()));
        }
        Ok(())
    }

    /// Concrete suites selected by this configuration.
    pub fn suites(&self) -> Vec<Suite> {
        match self.suite {
            Suite::All => Suite::CONCRETE.into_iter().filter(|s| s.groups().contains(&self.group)).collect(),
            s => vec![s],
        }
    }

    /// Effective configuration; keys resolved later read `auto`. The output
    /// directory is left out so that reports do not depend on where they land.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let mut m = BTreeMap::new();
        m.insert("suite".into(), self.suite.name().into());
        m.insert("group".into(), self.group.name().into());
        m.insert("n".into(), opt(self.n.map(|x| x.to_string())));
        m.insert("lambda".into(), self.lambda.to_string());
        m.insert("degree_cap".into(), opt(self.degree_cap.map(|x| x.to_string())));
        m.insert("quad_size".into(), opt(self.quad_size.map(|x| x.to_string())));
        m.insert("L".into(), opt(self.half_width.map(|x| x.to_string())));
        m.insert("M".into(), opt(self.points.map(|x| x.to_string())));
        m.insert("M_char".into(), opt(self.m_char.map(|x| x.to_string())));
        m.insert("T".into(), opt(self.theta_points.map(|x| x.to_string())));
        m.insert("epsilon".into(), self.epsilon.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("iterations".into(), self.iterations.to_string());
        m.insert("rank_cap".into(), self.rank_cap.to_string());
        m.insert("algebra_file".into(), opt(self.algebra_file.clone()));
        m.insert(
            "omega".into(),
            opt(self.omega.as_ref().map(|w| w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))),
        );
        m.insert("trials".into(), opt(self.trials.map(|x| x.to_string())));
        m
    }
}
