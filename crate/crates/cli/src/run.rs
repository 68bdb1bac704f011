//! Run directories: artifacts, verdicts, summary and the run record.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::experiments::{execute, Outcome};
use crate::verdict::to_jsonl;
use crate::CliError;

/// Environment variable that replaces the default output root.
pub const OUT_DIR_ENV: &str = "EFLAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "eflab-runs";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const RECORD_FILE: &str = "run.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const ERROR_FILE: &str = "error.json";

/// `--out`, then the environment, then the default.
pub fn resolve_out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Directory of one run: `<root>/<experiment>-<first 12 hex digits of the hash>`.
pub fn run_dir(root: &Path, config: &RunConfig) -> PathBuf {
    root.join(format!("{}-{}", config.experiment, &config.hash()[..12]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config_hash: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub directory: PathBuf,
    pub artifacts: Vec<String>,
    pub verdicts: usize,
    pub failed: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn passed(&self, strict: bool) -> bool {
        self.failed.is_empty() && !(strict && !self.warnings.is_empty())
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    kind: &'a str,
    message: String,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn summary_text(config: &RunConfig, outcome: &Outcome) -> String {
    let mut out = format!("experiment {} config {}\n", config.experiment, config.hash());
    for v in &outcome.verdicts {
        out.push_str(&v.summary_line());
        out.push('\n');
    }
    for w in &outcome.warnings {
        out.push_str("WARN ");
        out.push_str(w);
        out.push('\n');
    }
    let failed = outcome.verdicts.iter().filter(|v| !v.pass).count();
    out.push_str(&format!("{} verdicts, {} failed\n", outcome.verdicts.len(), failed));
    out
}

/// Executes `config` and writes its run directory under `root`. Module
/// errors leave an `error.json` record and are returned.
pub fn run(config: &RunConfig, root: &Path) -> Result<RunRecord, CliError> {
    let dir = run_dir(root, config);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(CONFIG_FILE), config.canonical())?;
    let started = now();
    let outcome = match execute(config, Some(&dir)) {
        Ok(o) => o,
        Err(e) => {
            let record = ErrorRecord {
                experiment: config.experiment.name(),
                config_hash: &config.hash(),
                kind: e.kind(),
                message: e.to_string(),
            };
            fs::write(
                dir.join(ERROR_FILE),
                serde_json::to_string_pretty(&record).expect("error record serializes") + "\n",
            )?;
            return Err(e);
        }
    };
    let mut artifacts = vec![CONFIG_FILE.to_string()];
    for (name, text) in &outcome.artifacts {
        fs::write(dir.join(name), text)?;
        artifacts.push(name.clone());
    }
    artifacts.extend(outcome.written.iter().cloned());
    fs::write(dir.join(VERDICTS_FILE), to_jsonl(&outcome.verdicts))?;
    fs::write(dir.join(SUMMARY_FILE), summary_text(config, &outcome))?;
    artifacts.push(VERDICTS_FILE.into());
    artifacts.push(SUMMARY_FILE.into());
    artifacts.push(RECORD_FILE.into());
    let record = RunRecord {
        experiment: config.experiment.name().into(),
        config_hash: config.hash(),
        started,
        finished: now(),
        directory: dir.clone(),
        artifacts,
        verdicts: outcome.verdicts.len(),
        failed: outcome.verdicts.iter().filter(|v| !v.pass).map(|v| v.name.clone()).collect(),
        warnings: outcome.warnings.clone(),
    };
    fs::write(
        dir.join(RECORD_FILE),
        serde_json::to_string_pretty(&record).expect("run record serializes") + "\n",
    )?;
    Ok(record)
}
