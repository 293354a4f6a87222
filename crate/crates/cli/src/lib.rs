//! Batch front end: parse a JSON config, dispatch one subcommand, write a
//! JSON report and a CSV, and turn the outcome into an exit status.

pub mod commands;
pub mod config;
pub mod output;

use commands::{Context, Outcome, RunError};
use config::{Command, ConfigError};
use std::path::{Path, PathBuf};
use wolff_core::baseline::{relative_drift, Baselines, Frozen};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FLAGGED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub refine: usize,
    pub baseline: Option<PathBuf>,
}

/// What happened, for the caller to print.
#[derive(Debug)]
pub struct RunResult {
    pub code: i32,
    /// Fatal flags, or the config diagnostic.
    pub messages: Vec<String>,
    pub csv_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

fn compare_baseline(path: &Path, command: &str, out: &mut Outcome, tol: f64) -> Result<(), ConfigError> {
    let mut store = Baselines::open(path).map_err(|e| ConfigError::at("--baseline", e))?;
    let mut entries = serde_json::Map::new();
    for (key, value) in out.baseline.clone() {
        let full = format!("{command}.{key}");
        let got = store.freeze_with(&full, "", || vec![value]).map_err(|e| ConfigError::at("--baseline", e))?;
        let stored = got.values()[0];
        let drift = relative_drift(stored, value);
        if !got.is_fresh() && drift > tol {
            out.flags.push(format!("baseline_drift:{key}"));
        }
        entries.insert(
            key,
            serde_json::json!({"stored": stored, "current": value, "drift": drift, "fresh": matches!(got, Frozen::Fresh(_))}),
        );
    }
    out.summary.insert("baseline".into(), serde_json::Value::Object(entries));
    store.save().map_err(|e| ConfigError::at("--baseline", e))
}

fn io(e: std::io::Error, what: &Path) -> RunError {
    RunError::Io(format!("{}: {e}", what.display()))
}

pub fn run(inv: &Invocation) -> RunResult {
    match run_inner(inv) {
        Ok(r) => r,
        Err(RunError::Config(e)) => RunResult { code: EXIT_CONFIG, messages: vec![e.to_string()], csv_path: None, report_path: None },
        Err(RunError::Io(m)) => RunResult { code: EXIT_CONFIG, messages: vec![m], csv_path: None, report_path: None },
        Err(RunError::Divergent(m)) => RunResult { code: EXIT_FLAGGED, messages: vec![format!("divergent: {m}")], csv_path: None, report_path: None },
    }
}

fn run_inner(inv: &Invocation) -> Result<RunResult, RunError> {
    let cfg = config::load(&inv.config)?;
    if let Some(c) = cfg.command {
        if c != inv.command {
            return Err(ConfigError::at("command", format!("config is for `{}`, not `{}`", c.name(), inv.command.name())).into());
        }
    }
    let tol = cfg.baseline_tolerance;
    let ctx = Context::new(inv.command, cfg, inv.seed, inv.refine)?;
    let mut out = commands::run(&ctx)?;
    if output::mark_nan(&mut out.rows) {
        out.flags.push("nan".into());
    }
    if let Some(b) = &inv.baseline {
        compare_baseline(b, inv.command.name(), &mut out, tol)?;
    }
    let failures = output::fatal_flags(&out);
    let code = if failures.is_empty() { EXIT_OK } else { EXIT_FLAGGED };
    std::fs::create_dir_all(&inv.out).map_err(|e| io(e, &inv.out))?;
    let name = inv.command.name();
    let csv_path = inv.out.join(format!("{name}.csv"));
    let report_path = inv.out.join(format!("{name}.report.json"));
    std::fs::write(&csv_path, output::csv(&out.rows, ctx.n)).map_err(|e| io(e, &csv_path))?;
    std::fs::write(&report_path, output::report(name, &out, code)).map_err(|e| io(e, &report_path))?;
    for (file, body) in &out.extra {
        let p = inv.out.join(format!("{name}.{file}"));
        std::fs::write(&p, body).map_err(|e| io(e, &p))?;
    }
    Ok(RunResult { code, messages: failures, csv_path: Some(csv_path), report_path: Some(report_path) })
}
