use std::fs;

use hermweyl::runner::{parse_config, run, write_outputs, ConfigError, Group, RunConfig, Suite};

fn config(text: &str) -> RunConfig {
    parse_config(text).unwrap_or_else(|e| panic!("{text:?}: {e}"))
}

fn line_of(text: &str) -> usize {
    match parse_config(text) {
        Err(ConfigError::Line { line, .. }) => line,
        other => panic!("{text:?}: expected a line error, got {other:?}"),
    }
}

#[test]
fn malformed_configs_name_the_line() {
    assert_eq!(line_of("suite = plancherel\nbogus = 1\n"), 2);
    assert_eq!(line_of("# header\n\nlambda = 0\n"), 3);
    assert_eq!(line_of("M = 33\n"), 1);
    assert_eq!(line_of("M = 4\n"), 1);
    assert_eq!(line_of("seed = 1\nseed = 2\n"), 2);
    assert_eq!(line_of("suite plancherel\n"), 1);
    assert_eq!(line_of("group = lie\n"), 1);
    assert_eq!(line_of("epsilon = 1.5\n"), 1);
    assert_eq!(line_of("L = -3\n"), 1);
    assert_eq!(line_of("omega = 1, x\n"), 1);
    assert_eq!(parse_config("# nothing\n"), Err(ConfigError::Empty));
}

#[test]
fn cross_key_rules_are_enforced() {
    let invalid = |text: &str| matches!(parse_config(text), Err(ConfigError::Invalid { .. }));
    assert!(invalid("group = motion\nn = 2\n"));
    assert!(invalid("group = heisenberg\nsuite = symplectic\n"));
    assert!(invalid("group = heisenberg\nsuite = intertwine\n"));
    assert!(invalid("group = heisenberg\nn = 2\nsuite = pocs\n"));
    assert!(invalid("group = heisenberg\nomega = 1\n"));
    assert!(invalid("degree_cap = 24\nquad_size = 20\n"));
    assert!(invalid("group = motion\nM_char = 8\nT = 16\n"));
    let mut cfg = config("group = step2\nsuite = symplectic\n");
    cfg.algebra_file = Some("/nonexistent/algebra.txt".into());
    assert!(matches!(run(&cfg), Err(ConfigError::Invalid { .. })));
    cfg.algebra_file = Some("heisenberg".into());
    cfg.omega = Some(vec![1.0, 2.0]);
    assert!(matches!(run(&cfg), Err(ConfigError::Invalid { .. })));
}

#[test]
fn suite_tables() {
    for s in Suite::CONCRETE {
        assert_eq!(Suite::parse(s.name()), Some(s));
        assert!(!s.groups().is_empty());
    }
    assert_eq!(Suite::parse("all"), Some(Suite::All));
    assert_eq!(Suite::Symplectic.groups(), &[Group::Step2]);
    assert_eq!(Suite::Intertwine.groups(), &[Group::Motion]);
    let all = config("group = motion\nsuite = all\n");
    assert_eq!(all.suites().len(), 5);
}

#[test]
fn symplectic_run_writes_one_table_per_fixture() {
    let out = run(&config("group = step2\nsuite = symplectic\n")).unwrap();
    assert!(out.report.all_pass());
    let names: Vec<&str> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["symplectic_heisenberg.csv", "symplectic_quaternionic.csv", "symplectic_degenerate.csv"]);
    for a in &out.artifacts {
        let mut lines = a.csv.lines();
        assert_eq!(lines.next(), Some("quantity,value"));
        for l in lines {
            assert_eq!(l.split(',').count(), 2, "{l}");
        }
    }
    let degenerate = &out.artifacts[2].csv;
    assert!(degenerate.contains("radical_dim,2"));
    assert!(degenerate.contains("metivier,false"));

    let scaled = run(&config("group = step2\nsuite = symplectic\nalgebra_file = heisenberg\nomega = 3\n")).unwrap();
    assert!(scaled.artifacts[0].csv.lines().any(|l| l == "d_1,3"));
}

#[test]
fn reports_are_reproducible_and_written_to_disk() {
    let cfg = config("group = motion\nsuite = intertwine\nlambda = -1.5\n");
    let first = run(&cfg).unwrap();
    let second = run(&cfg).unwrap();
    assert_eq!(first.report.to_json(), second.report.to_json());

    let v: serde_json::Value = serde_json::from_str(&first.report.to_json()).unwrap();
    assert_eq!(v["group"], "motion");
    assert_eq!(v["seed"], 42);
    assert_eq!(v["config"]["lambda"], "-1.5");
    assert_eq!(v["config"]["M"], "auto");
    assert!(v["config"].get("output_dir").is_none());
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 2);
    for c in checks {
        assert_eq!(c["pass"], true);
        assert!(c["residual"].as_f64().unwrap() <= c["tolerance"].as_f64().unwrap());
    }

    let dir = std::env::temp_dir().join(format!("hermweyl-runner-test-{}", std::process::id()));
    write_outputs(&first, &dir).unwrap();
    assert_eq!(fs::read_to_string(dir.join("report.json")).unwrap(), first.report.to_json());
    let timing: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("timing.json")).unwrap()).unwrap();
    assert!(timing["wall_seconds"].as_f64().unwrap() >= 0.0);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn an_undersized_grid_fails_honestly() {
    let out = run(&config("suite = plancherel\nL = 2\nM = 16\n")).unwrap();
    assert!(!out.report.all_pass());
    let c = &out.report.checks[0];
    assert!(c.residual.unwrap() > c.tolerance);
}
