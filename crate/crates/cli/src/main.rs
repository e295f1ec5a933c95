mod config;
mod output;
mod verbs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use rayon::prelude::*;
use serde_json::Value;

use config::{config_error, parse_value, set_path, ConfigError, Format, RunConfig, Verb};
use output::{commit, Artifacts, Cell, RunRecord, Table};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Simulator for double-well nanomechanical qubits.
#[derive(Debug, Parser)]
#[command(name = "nemsq", version)]
struct Cli {
    /// What to compute; may also be given as `verb` in the config file.
    #[arg(value_enum)]
    verb: Option<Verb>,
    /// JSON configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (default `runs/<verb>`); relative paths resolve against `NEMSQ_OUTPUT_ROOT` when set.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Override a parameter by dotted path, e.g. `--set physics.a=2.5`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweeps and internal parallel loops.
    #[arg(long)]
    parallel: Option<usize>,
    /// Sweep: parameter path to vary.
    #[arg(long)]
    axis: Option<String>,
    /// Sweep: comma-separated values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
    /// Sweep: verb run at every value.
    #[arg(long, value_enum)]
    sweep_verb: Option<Verb>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|e| {
        e.downcast_ref::<ConfigError>().is_some()
            || e.downcast_ref::<nemsq_core::Error>().is_some_and(|c| c.is_config())
            || e.downcast_ref::<serde_json::Error>().is_some()
    });
    if config {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Merges the config file, `--set` overrides and the dedicated flags into one JSON value.
fn merged_value(cli: &Cli) -> anyhow::Result<Value> {
    let mut v = config::load_value(cli.config.as_deref())?;
    if !v.is_object() {
        return Err(config_error("--config", "top level must be a JSON object"));
    }
    for s in &cli.set {
        let (path, value) = s.split_once('=').ok_or_else(|| config_error("--set", format!("expected PATH=VALUE, got `{s}`")))?;
        set_path(&mut v, path.trim(), parse_value(value.trim()))?;
    }
    if let Some(n) = cli.n_points {
        set_path(&mut v, "numerics.n_points", n.into())?;
    }
    if let Some(dt) = cli.dt {
        set_path(&mut v, "numerics.dt", dt.into())?;
    }
    if let Some(f) = cli.format {
        set_path(&mut v, "output.format", serde_json::to_value(f)?)?;
    }
    if let Some(axis) = &cli.axis {
        set_path(&mut v, "sweep.axis", axis.clone().into())?;
    }
    if !cli.values.is_empty() {
        set_path(&mut v, "sweep.values", Value::Array(cli.values.iter().map(|s| parse_value(s.trim())).collect()))?;
    }
    if let Some(sv) = cli.sweep_verb {
        set_path(&mut v, "sweep.verb", serde_json::to_value(sv)?)?;
    }
    Ok(v)
}

fn resolve_out(explicit: Option<&Path>, verb: Verb) -> PathBuf {
    let p = explicit.map(Path::to_path_buf).unwrap_or_else(|| Path::new("runs").join(verb.name()));
    match std::env::var_os("NEMSQ_OUTPUT_ROOT") {
        Some(root) if p.is_relative() => PathBuf::from(root).join(p),
        _ => p,
    }
}

fn record(verb: Verb, cfg: &RunConfig, started: Instant) -> anyhow::Result<RunRecord> {
    Ok(RunRecord {
        tool: "nemsq".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        verb: verb.name().into(),
        config: config::to_value(cfg)?,
        duration_secs: started.elapsed().as_secs_f64(),
        summary: Default::default(),
        files: Vec::new(),
    })
}

fn run_single(verb: Verb, cfg: &RunConfig, dir: &Path) -> anyhow::Result<RunRecord> {
    let started = Instant::now();
    let artifacts = verbs::execute(verb, cfg)?;
    commit(dir, artifacts, record(verb, cfg, started)?)
}

struct SweepOutcome {
    value: Value,
    dir: String,
    result: Result<(), (u8, String)>,
}

fn run_sweep(base: &Value, cfg: &RunConfig, dir: &Path) -> anyhow::Result<u8> {
    let started = Instant::now();
    let sweep = &cfg.sweep;
    let verb = sweep.verb.ok_or_else(|| config_error("sweep.verb", "missing; use --sweep-verb"))?;
    if verb == Verb::Sweep {
        return Err(config_error("sweep.verb", "sweeps cannot be nested"));
    }
    if sweep.axis.is_empty() {
        return Err(config_error("sweep.axis", "missing; use --axis"));
    }
    if sweep.values.is_empty() {
        return Err(config_error("sweep.values", "no values; use --values"));
    }
    let build = |value: &Value| -> anyhow::Result<RunConfig> {
        let mut v = base.clone();
        set_path(&mut v, &sweep.axis, value.clone())?;
        config::from_value(v)
    };
    // A bad axis fails every run the same way; report it before starting any.
    build(&sweep.values[0])?;

    let outcomes: Vec<SweepOutcome> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(i, value)| {
            let sub = format!("run_{i:03}");
            let result = build(value)
                .and_then(|c| run_single(verb, &c, &dir.join(&sub)))
                .map(|_| ())
                .map_err(|e| (exit_code(&e), format!("{e:#}")));
            SweepOutcome { value: value.clone(), dir: sub, result }
        })
        .collect();

    let mut index = Table::new("index", &["index", "value", "status", "exit_code", "output_dir", "error"]);
    let mut worst = 0u8;
    for (i, o) in outcomes.iter().enumerate() {
        let value = match &o.value {
            Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        let (status, code, err) = match &o.result {
            Ok(()) => ("ok", 0u8, String::new()),
            Err((c, e)) => ("failed", *c, e.clone()),
        };
        worst = worst.max(code);
        let out_dir = if code == 0 { o.dir.clone() } else { String::new() };
        index.push(vec![i.into(), Cell::Text(value), status.into(), (code as usize).into(), out_dir.into(), err.into()]);
    }
    let mut art = Artifacts::default();
    art.table(&index, Format::Csv)?;
    art.note("axis", &sweep.axis);
    art.note("runs", outcomes.len());
    art.note("failed", outcomes.iter().filter(|o| o.result.is_err()).count());
    commit(dir, art, record(Verb::Sweep, cfg, started)?)?;
    println!("sweep: {} runs, {} failed -> {}", outcomes.len(), outcomes.iter().filter(|o| o.result.is_err()).count(), dir.display());
    Ok(worst)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let value = merged_value(&cli)?;
    let cfg = config::from_value(value.clone())?;
    let verb = cli.verb.or(cfg.verb).ok_or_else(|| config_error("verb", "no verb given"))?;
    if let Some(p) = cli.parallel {
        if p == 0 {
            return Err(config_error("--parallel", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(p).build_global().context("configuring the thread pool")?;
    }
    let dir = resolve_out(cli.out.as_deref().or(cfg.output.dir.as_deref()), verb);
    if verb == Verb::Sweep {
        return run_sweep(&value, &cfg, &dir);
    }
    let rec = run_single(verb, &cfg, &dir)?;
    println!("{}: {} files -> {}", verb.name(), rec.files.len() + 1, dir.display());
    println!("{}", serde_json::to_string(&rec.summary)?);
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
