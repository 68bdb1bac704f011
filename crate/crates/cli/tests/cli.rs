use std::path::Path;
use std::process::{Command, Output};

use eflab_cli::run::{run, run_dir, ERROR_FILE, OUT_DIR_ENV, RECORD_FILE, VERDICTS_FILE};
use eflab_cli::verdict::{conforms, from_jsonl};
use eflab_cli::{Experiment, RunConfig};

fn eflab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eflab"))
        .args(args)
        .env(OUT_DIR_ENV, out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn passing_run_exits_zero_and_writes_layout() {
    let root = tempfile::tempdir().unwrap();
    let o = eflab(&["lp-inspect", "--set", "trials=5", "--jobs", "2"], root.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("PASS lp.partition-of-unity"));
    let config = RunConfig::from_text(Experiment::LpInspect, "trials = 5").unwrap();
    let dir = run_dir(root.path(), &config);
    for f in ["config.txt", "cutoff.csv", "shells.csv", VERDICTS_FILE, "summary.txt", RECORD_FILE] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn written_verdicts_conform_to_schema() {
    let root = tempfile::tempdir().unwrap();
    let config = RunConfig::from_text(Experiment::DampedMode, "").unwrap();
    let record = run(&config, root.path()).unwrap();
    let text = std::fs::read_to_string(record.directory.join(VERDICTS_FILE)).unwrap();
    let mut lines = 0;
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        conforms(&value).unwrap();
        lines += 1;
    }
    assert_eq!(lines, record.verdicts);
    assert_eq!(from_jsonl(&text).unwrap().len(), lines);
}

#[test]
fn failed_verdict_exits_one() {
    let root = tempfile::tempdir().unwrap();
    // a bound below any attainable ratio
    let o = eflab(&["damped-mode", "--set", "bound=0.5"], root.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL damped.state-weak-ratio"));
}

#[test]
fn strict_promotes_warnings() {
    let root = tempfile::tempdir().unwrap();
    // d = 1 lies outside the enhancement regime, which only warns
    let args = ["damped-mode", "--set", "dim=1", "--set", "sigma1=0.5"];
    let lenient = eflab(&args, root.path());
    assert!(stdout(&lenient).contains("WARN"));
    let mut strict = args.to_vec();
    strict.push("--strict");
    let o = eflab(&strict, root.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failure_leaves_error_record() {
    let root = tempfile::tempdir().unwrap();
    let o = eflab(&["simulate", "--set", "amplitude=0.95"], root.path());
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "numerics");
    let config = RunConfig::from_text(Experiment::Simulate, "amplitude = 0.95").unwrap();
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir(root.path(), &config).join(ERROR_FILE)).unwrap()).unwrap();
    assert_eq!(record["kind"], "numerics");
    assert_eq!(record["config_hash"], config.hash());
    assert!(record["message"].as_str().unwrap().contains("positivity"));
}

#[test]
fn invalid_configuration_exits_two() {
    let root = tempfile::tempdir().unwrap();
    let o = eflab(&["linear-decay", "--set", "sigma1=2"], root.path());
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    let o = eflab(&["lp-inspect", "--set", "no_such_key=1"], root.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dry_run_hash_matches_file_and_overrides() {
    let root = tempfile::tempdir().unwrap();
    let file = root.path().join("run.conf");
    std::fs::write(&file, "# comment\ntrials = 7\nseed = 3\n").unwrap();
    let from_file = eflab(&["validate", "--dry-run", "--config", file.to_str().unwrap()], root.path());
    let from_flags = eflab(&["validate", "--dry-run", "--set", "trials=7", "--seed", "3"], root.path());
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(stdout(&from_file), stdout(&from_flags));
    // a later override wins over the file
    let overridden = eflab(
        &["validate", "--dry-run", "--config", file.to_str().unwrap(), "--seed", "4"],
        root.path(),
    );
    assert_ne!(stdout(&from_file), stdout(&overridden));
    assert!(stdout(&overridden).contains("seed=4"));
    assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 1, "dry run wrote a run directory");
}

#[test]
fn keys_lists_every_default() {
    let root = tempfile::tempdir().unwrap();
    let o = eflab(&["keys"], root.path());
    assert_eq!(o.status.code(), Some(0));
    for (k, _, _) in eflab_cli::config::KEYS {
        assert!(stdout(&o).contains(k), "{k}");
    }
}
